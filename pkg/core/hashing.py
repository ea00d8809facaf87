"""
FNV-1a hashes. Mock backends and the per-pass seed policy depend on these
being identical on every host, so nothing here may use Python's hash().
"""

FNV32_OFFSET = 0x811C9DC5
FNV32_PRIME = 0x01000193
FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def _as_bytes(data):
    if isinstance(data, str):
        return data.encode('utf-8')
    return bytes(data)


def fnv1a_32(data):
    h = FNV32_OFFSET
    for byte in _as_bytes(data):
        h ^= byte
        h = (h * FNV32_PRIME) & 0xFFFFFFFF
    return h


def fnv1a_64(data):
    h = FNV64_OFFSET
    for byte in _as_bytes(data):
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def pass_seed(run_seed, image_path, label):
    """Seed of one inpainting pass, stable under reordering and parallelism."""
    return fnv1a_64(f'{run_seed}\x1f{image_path}\x1f{label}')
