"""
Run configuration for the flow-category tools.

Values come from the environment (a .env file is honoured) and can be
overridden per call, which is how CLI flags win over the environment.
"""

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional
import os

from dotenv import load_dotenv
from sympy import isprime

# Load environment variables
load_dotenv()


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances consumed by the critical point finder and the flow integrator."""

    tol_crit: float = 1e-10
    tol_nondeg: float = 1e-6
    delta_arrive: float = 1e-6
    tol_merge: float = 1e-6
    bisection_depth: int = 60
    max_steps: int = 20000


def _optional_int(value: Optional[str]) -> Optional[int]:
    if value is None or value.strip() == "":
        return None
    return int(value)


@dataclass(frozen=True)
class RunConfig:
    """
    Settings shared by every CLI command.

    Usage:
        config = RunConfig.from_env(seed=3)
        config.validate()
        tolerances = config.tolerances()
    """

    tol_crit: float = 1e-10
    tol_nondeg: float = 1e-6
    delta_arrive: float = 1e-6
    tol_merge: float = 1e-6
    bisection_depth: int = 60
    max_steps: int = 20000
    shift: Optional[int] = None
    coeffs: str = "Z"
    seed: int = 0
    jobs: int = 1
    out_dir: str = "tmp"
    log_level: str = "INFO"

    @classmethod
    def from_env(cls, **overrides: Any) -> 'RunConfig':
        """Read FLOWCAT_* variables, then apply non-None keyword overrides."""
        config = cls(
            tol_crit=float(os.getenv('FLOWCAT_TOL_CRIT', 1e-10)),
            tol_nondeg=float(os.getenv('FLOWCAT_TOL_NONDEG', 1e-6)),
            delta_arrive=float(os.getenv('FLOWCAT_DELTA_ARRIVE', 1e-6)),
            tol_merge=float(os.getenv('FLOWCAT_TOL_MERGE', 1e-6)),
            bisection_depth=int(os.getenv('FLOWCAT_BISECTION_DEPTH', 60)),
            max_steps=int(os.getenv('FLOWCAT_MAX_STEPS', 20000)),
            shift=_optional_int(os.getenv('FLOWCAT_SHIFT')),
            coeffs=os.getenv('FLOWCAT_COEFFS', 'Z'),
            seed=int(os.getenv('FLOWCAT_SEED', 0)),
            jobs=int(os.getenv('FLOWCAT_JOBS', 1)),
            out_dir=os.getenv('FLOWCAT_OUT_DIR', 'tmp'),
            log_level=os.getenv('LOG_LEVEL', 'INFO').upper(),
        )
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"Unknown config keys: {sorted(unknown)}")
        return replace(config, **{k: v for k, v in overrides.items() if v is not None})

    def validate(self) -> None:
        """
        Raises:
            ValueError: If a tolerance is not positive, jobs < 1 or the bisection depth < 1.
        """
        for name in ('tol_crit', 'tol_nondeg', 'delta_arrive', 'tol_merge'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")
        if self.bisection_depth < 1:
            raise ValueError(f"bisection_depth must be >= 1, got {self.bisection_depth}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        coefficient_characteristic(self.coeffs)

    def tolerances(self) -> Tolerances:
        return Tolerances(
            tol_crit=self.tol_crit,
            tol_nondeg=self.tol_nondeg,
            delta_arrive=self.delta_arrive,
            tol_merge=self.tol_merge,
            bisection_depth=self.bisection_depth,
            max_steps=self.max_steps,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def coefficient_characteristic(coeffs: str) -> Optional[int]:
    """
    Parse a --coeffs value.

    Returns:
        None for Z, 0 for Q, p for Fp:p.

    Raises:
        ValueError: On anything else, including Fp:p with p not prime.
    """
    text = coeffs.strip()
    if text.upper() == "Z":
        return None
    if text.upper() == "Q":
        return 0
    if text.upper().startswith("FP:"):
        p = int(text.split(":", 1)[1])
        if not isprime(p):
            raise ValueError(f"Fp:p needs a prime p, got {p}")
        return p
    raise ValueError(f"Unknown coefficients {coeffs!r}: use Z, Q or Fp:p")
