"""Training-condition descriptors."""

from dataclasses import asdict, dataclass
from typing import Optional

from ..errors import InvalidArgument

KINDS = ("KD", "RCD", "SIDDO", "LS", "FeatureKD")
_CANON = {k.lower(): k for k in KINDS}
_CANON.update({"feature-kd": "FeatureKD", "feature_kd": "FeatureKD", "featurekd": "FeatureKD"})


def canonical_kind(kind):
    try:
        return _CANON[str(kind).lower()]
    except KeyError:
        raise InvalidArgument(f"unknown condition kind {kind!r}; expected one of {KINDS}") from None


@dataclass(frozen=True)
class Condition:
    """One training regime.

    ``alpha`` is required for every kind except SIDDO, where it is fixed at
    0. ``block`` is only meaningful for FeatureKD. ``rcd_normalize`` and
    ``rcd_fixed`` select the RCD noise variant (default: normalised, fresh
    per step).
    """

    kind: str
    alpha: Optional[float] = None
    temperature: float = 1.0
    block: Optional[int] = None
    data_seed: int = 0
    teacher: Optional[str] = None
    rcd_normalize: bool = True
    rcd_fixed: bool = False
    t2_scale: bool = False

    def __post_init__(self):
        kind = canonical_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == "SIDDO":
            if self.alpha not in (None, 0, 0.0):
                raise InvalidArgument("SIDDO takes no alpha")
            object.__setattr__(self, "alpha", 0.0)
            if self.teacher is not None:
                raise InvalidArgument("SIDDO takes no teacher")
        elif self.alpha is None:
            raise InvalidArgument(f"{kind} requires alpha")
        alpha = float(self.alpha)
        if not 0.0 <= alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        if not float(self.temperature) > 0:
            raise InvalidArgument("temperature must be positive")
        if kind == "FeatureKD":
            if self.block is None or int(self.block) < 0:
                raise InvalidArgument("FeatureKD needs a non-negative block index")
        elif self.block is not None:
            raise InvalidArgument("block index only applies to FeatureKD")

    @property
    def needs_teacher(self):
        return self.kind in ("KD", "FeatureKD")

    @property
    def label(self):
        """Stable text key, e.g. ``kd-0.5``, ``siddo``, ``featurekd-0.9-b1``."""
        if self.kind == "SIDDO":
            return "siddo"
        out = f"{self.kind.lower()}-{self.alpha:g}"
        if self.temperature != 1.0:
            out += f"-t{self.temperature:g}"
        if self.block is not None:
            out += f"-b{self.block}"
        if self.kind == "RCD":
            if not self.rcd_normalize:
                out += "-raw"
            if self.rcd_fixed:
                out += "-fixed"
        return out

    def to_dict(self):
        return asdict(self)
