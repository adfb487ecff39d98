"""Setting-randomness bounds for CHSH violations by local hidden variable models."""
from .coremath import C_Q, C_Q_EXACT, C_Q_LITERAL, S_Q, DomainError
from .kernels import BACKEND
from .profile import Profile, SettingSet

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "C_Q",
    "C_Q_EXACT",
    "C_Q_LITERAL",
    "DomainError",
    "Profile",
    "S_Q",
    "SettingSet",
    "__version__",
]
