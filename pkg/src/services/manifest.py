import hashlib
import logging
import platform
from importlib import metadata
from pathlib import Path

from src.config import Settings, config_hash, dump_config_lines
from src.schemas.manifest import OutputFile, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
TRACKED_PACKAGES = ("aarm-recommender", "numpy", "pydantic", "pydantic-settings")


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in TRACKED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path_for(output: str | Path) -> Path:
    """``manifest.json`` inside an output directory, ``<name>.manifest.json`` next to an output file."""
    path = Path(output)
    if path.is_dir() or not path.suffix:
        return path / MANIFEST_FILE
    return path.with_name(path.stem + ".manifest.json")


def write_manifest(
    manifest_path: str | Path,
    command: str,
    settings: Settings,
    outputs: list[Path],
    argv: list[str] | None = None,
) -> Path:
    """Record the configuration, versions and output checksums of one command.

    :param manifest_path: Manifest file to write
    :param command: Subcommand name
    :param settings: Effective settings of the run
    :param outputs: Files produced by the run
    :param argv: Command-line arguments
    :returns: Manifest path
    """
    manifest_path = Path(manifest_path)
    directory = manifest_path.parent
    directory.mkdir(parents=True, exist_ok=True)

    files: list[OutputFile] = []
    for output in sorted({Path(p) for p in outputs}):
        if output.resolve() == manifest_path.resolve() or not output.is_file():
            continue
        try:
            shown = output.resolve().relative_to(directory.resolve()).as_posix()
        except ValueError:
            shown = output.as_posix()
        files.append(OutputFile(path=shown, sha256=file_sha256(output)))

    manifest = RunManifest(
        command=command,
        argv=argv or [],
        config_hash=config_hash(settings),
        seed=settings.seed,
        versions=package_versions(),
        config=dump_config_lines(settings),
        outputs=files,
    )
    manifest_path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Manifest written to {manifest_path}")
    return manifest_path
