"""Binary chain snapshots: length-prefixed sections and a trailing checksum.

Every random variate of a sweep comes from a stream keyed by (seed, sweep,
role), so the seed and sweep counter are the complete RNG position.
"""
import hashlib
import io
import os
import struct

import numpy as np

from ..errors import IntegrityError

MAGIC = b"HDPCCSNP"
VERSION = 1
_LEN = struct.Struct("<Q")


def _arr_bytes(a):
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(a), allow_pickle=False)
    return buf.getvalue()


def _arr_load(b):
    return np.load(io.BytesIO(b), allow_pickle=False)


def _pack_sections(sections):
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", VERSION))
    out.write(struct.pack("<I", len(sections)))
    for name, arrays in sections:
        nb = name.encode()
        body = b"".join(_LEN.pack(len(x)) + x for x in map(_arr_bytes, arrays))
        out.write(_LEN.pack(len(nb)) + nb)
        out.write(_LEN.pack(len(arrays)))
        out.write(_LEN.pack(len(body)) + body)
    data = out.getvalue()
    return data + hashlib.blake2b(data, digest_size=8).digest()


def _read(buf, pos, n):
    if pos + n > len(buf):
        raise IntegrityError("snapshot truncated")
    return buf[pos:pos + n], pos + n


def _unpack_sections(data):
    if len(data) < len(MAGIC) + 16:
        raise IntegrityError("snapshot truncated")
    body, digest = data[:-8], data[-8:]
    if hashlib.blake2b(body, digest_size=8).digest() != digest:
        raise IntegrityError("snapshot checksum mismatch")
    if body[:len(MAGIC)] != MAGIC:
        raise IntegrityError("not a chain snapshot")
    pos = len(MAGIC)
    (version,), pos = struct.unpack("<I", body[pos:pos + 4]), pos + 4
    if version != VERSION:
        raise IntegrityError(f"snapshot version {version}, expected {VERSION}")
    (count,), pos = struct.unpack("<I", body[pos:pos + 4]), pos + 4
    sections = {}
    for _ in range(count):
        raw, pos = _read(body, pos, 8)
        nb, pos = _read(body, pos, _LEN.unpack(raw)[0])
        raw, pos = _read(body, pos, 8)
        n_arr = _LEN.unpack(raw)[0]
        raw, pos = _read(body, pos, 8)
        sec, pos = _read(body, pos, _LEN.unpack(raw)[0])
        arrays, p = [], 0
        for _ in range(n_arr):
            raw, p = _read(sec, p, 8)
            a, p = _read(sec, p, _LEN.unpack(raw)[0])
            arrays.append(_arr_load(a))
        sections[nb.decode()] = arrays
    if pos != len(body):
        raise IntegrityError("trailing bytes in snapshot")
    return sections


def snapshot_bytes(state):
    hp = state.hp
    sections = [
        ("header", [np.array(state.labels.shape, np.int64), np.array(state.values.p.shape, np.int64)]),
        ("rng", [np.array([state.seed, state.sweep], np.uint64)]),
        ("labels", [state.labels, state.tval, state.seat, state.z, state.imputed,
                    np.array([len(g) for g in state.g0_val], np.int64),
                    np.concatenate(state.g0_val).astype(np.int64) if state.g0_val
                    else np.empty(0, np.int64)]),
        ("atoms", [state.values.p]),
        ("hyper", [hp.vector(), np.array(hp.consts, float), np.array([hp.d], np.int64)]),
        ("counters", [np.asarray(state.cache_hint, np.int64), np.array([state.accepted], np.int64)]),
    ]
    return _pack_sections(sections)


def state_from_bytes(data):
    from ..gibbs import ChainState, ValueStore
    from ..model import HyperParams

    s = _unpack_sections(data)
    try:
        seed, sweep = (int(x) for x in s["rng"][0])
        labels, tval, seat, z, imputed, g_len, g_flat = s["labels"]
        g0_val = np.split(g_flat, np.cumsum(g_len)[:-1]) if g_len.size else []
        vec, consts, d = s["hyper"]
        hp = HyperParams.default(int(d[0]), tuple(map(tuple, consts))).with_vector(vec)
        hint, acc = s["counters"]
        if tuple(s["header"][0]) != labels.shape:
            raise IntegrityError("header shape disagrees with label section")
    except (KeyError, ValueError) as e:
        raise IntegrityError(f"malformed snapshot: {e}") from None
    return ChainState(labels, tval, seat, z, [np.asarray(g, np.int64) for g in g0_val],
                      ValueStore(s["atoms"][0]), imputed, hp, seed, sweep, hint, int(acc[0]))


def snapshot_chain(state, path):
    data = snapshot_bytes(state)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def restore_chain(path):
    with open(path, "rb") as f:
        return state_from_bytes(f.read())
