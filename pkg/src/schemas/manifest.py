from pydantic import BaseModel, Field


class OutputFile(BaseModel):
    path: str = Field(..., description="Path relative to the manifest directory")
    sha256: str


class RunManifest(BaseModel):
    """Provenance of one command's outputs."""

    command: str
    argv: list[str] = Field(default_factory=list)
    config_hash: str = Field(..., description="SHA-256 over the dumped effective configuration")
    seed: int
    versions: dict[str, str] = Field(default_factory=dict)
    config: list[str] = Field(default_factory=list, description="Effective configuration, one key=value per line")
    outputs: list[OutputFile] = Field(default_factory=list)
