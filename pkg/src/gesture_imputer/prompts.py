"""Offline prompt text for an external referring-expression generator."""

from __future__ import annotations

from gesture_imputer.placement import ImputationRecord

_TEMPLATES = (
    "Write one short referring expression for the {label}. {context} "
    "The listener can see where the person points, so avoid repeating what the gesture already shows.",
    "A listener must pick out the {label} from other objects in the room. {context} "
    "Give a brief instruction the pointing person could say that singles out this {label}.",
    "{context} Phrase a concise description of the {label} that, together with the gesture, "
    "leaves no doubt about which object is meant.",
    "Describe the {label} in a few words as the person pointing at it would. {context} "
    "Mention distinguishing attributes or nearby objects only if needed.",
)


def pointing_context(record: ImputationRecord, label: str) -> str:
    direction = "down" if record.pointing_elevation_deg < 0 else "up"
    return (
        f"A person standing {record.distance_to_target_m:.1f} m away points with their "
        f"{record.handedness} hand at the {label}, arm angled {abs(record.pointing_elevation_deg):.0f} "
        f"degrees {direction}."
    )


def render_prompt(record: ImputationRecord, target_label: str, n_variants: int = 3) -> list:
    """Fill ``n_variants`` distinct prompt templates for one placement record."""
    label = target_label.strip()
    if not label:
        raise ValueError("target label must be non-empty")
    if n_variants < 1:
        raise ValueError("n_variants must be >= 1")
    context = pointing_context(record, label)
    ident = f"[scene {record.scene_id} | object {record.target_object_id} | avatar {record.avatar_id}]"
    out = []
    for n in range(n_variants):
        body = _TEMPLATES[n % len(_TEMPLATES)].format(label=label, context=context)
        if n >= len(_TEMPLATES):
            body += f" (variant {n + 1})"
        out.append(f"{ident} {body}")
    return out
