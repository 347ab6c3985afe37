import hashlib


def derive_seed(master: int, *names) -> int:
    """Stable 31-bit seed for a named stage, from the master seed."""
    key = ":".join([str(int(master))] + [str(n) for n in names]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little") & 0x7FFFFFFF
