from src.exceptions import UnknownVariantError
from src.schemas.model.models import VariantSpec

VARIANTS: dict[str, VariantSpec] = {
    "aarm": VariantSpec(name="aarm"),
    # Shared aspects only, each interacting with itself; no aspect-level attention
    "a_inter": VariantSpec(name="a_inter", aspect_pool="shared_self", user_context="shared"),
    "no_aspect_att": VariantSpec(name="no_aspect_att", aspect_pool="sum"),
    "a_static": VariantSpec(name="a_static", user_context="user"),
    "no_user_att": VariantSpec(name="no_user_att", user_pool="sum"),
    "global_only": VariantSpec(name="global_only", use_aspect=False),
    "aspect_only": VariantSpec(name="aspect_only", use_global=False),
}

VARIANT_ORDER = tuple(VARIANTS)


def get_variant(name: str) -> VariantSpec:
    """Look up a registered variant.

    :param name: Variant tag
    :returns: Forward-pass assembly
    :raises UnknownVariantError: tag not registered
    """
    try:
        return VARIANTS[name]
    except KeyError as e:
        raise UnknownVariantError(f"Unknown variant '{name}'; expected one of {', '.join(VARIANT_ORDER)}") from e


def parse_variant_list(text: str) -> list[str]:
    names = [name.strip() for name in text.split(",") if name.strip()]
    for name in names:
        get_variant(name)
    return names
