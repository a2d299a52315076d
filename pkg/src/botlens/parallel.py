import os


def thread_count() -> int:
    """Worker cap from ``BOTLENS_THREADS`` (default 1, sequential)."""
    raw = os.environ.get("BOTLENS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
