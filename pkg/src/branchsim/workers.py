import os

ENV_VAR = "BRANCHSIM_THREADS"


def worker_count(default: int | None = None) -> int:
    """Worker cap from BRANCHSIM_THREADS, else ``default`` or the CPU count."""
    raw = os.environ.get(ENV_VAR, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
        return n
    return default or os.cpu_count() or 1
