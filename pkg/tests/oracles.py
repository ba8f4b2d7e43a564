"""Independent reference implementations used to check the package.

Nothing here imports from ``dataspace``; each oracle is written straight
from the documented semantics.
"""
import hashlib
import json
import random
import string

_MISSING = object()


def reference_canonical(sp) -> bytes:
    """Canonical bytes via the stdlib JSON encoder after a recursive key sort."""

    def sort(v):
        if isinstance(v, dict):
            return {k: sort(v[k]) for k in sorted(v)}
        if isinstance(v, (list, tuple)):
            return [sort(x) for x in v]
        return v

    return json.dumps(
        sort(sp), sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def reference_id(sp) -> str:
    return hashlib.sha256(reference_canonical(sp)).hexdigest()[:32]


# --- brute-force filter evaluation -------------------------------------------------


def _get(doc, path):
    for part in path.split("."):
        if type(doc) is not dict or part not in doc:
            return _MISSING
        doc = doc[part]
    return doc


def _num(x):
    return type(x) in (int, float)


def _eq(a, b):
    if type(a) is bool or type(b) is bool:
        return type(a) is bool and type(b) is bool and a == b
    if _num(a) and _num(b):
        return a == b
    if type(a) is dict and type(b) is dict:
        return sorted(a) == sorted(b) and all(_eq(a[k], b[k]) for k in a)
    if type(a) in (list, tuple) and type(b) in (list, tuple):
        return len(a) == len(b) and all(_eq(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


def brute_force_match(flt: dict, doc: dict) -> bool:
    """Evaluate a filter *document* directly, without building an expression tree."""
    for key, value in flt.items():
        if key == "$and":
            if not all(brute_force_match(f, doc) for f in value):
                return False
        elif key == "$or":
            if not any(brute_force_match(f, doc) for f in value):
                return False
        elif key == "$not":
            if brute_force_match(value, doc):
                return False
        else:
            path, op = key, "$eq"
            if "." in key and key.rsplit(".", 1)[1].startswith("$"):
                path, op = key.rsplit(".", 1)
                ops = {op: value}
            elif type(value) is dict and value and all(k.startswith("$") for k in value):
                ops = value
            else:
                ops = {"$eq": value}
            for op, operand in ops.items():
                if not _field_op(op, operand, _get(doc, path)):
                    return False
    return True


def _field_op(op, operand, v):
    if op == "$not":
        return not all(_field_op(o, x, v) for o, x in operand.items())
    if op == "$exists":
        return (v is not _MISSING) is operand
    if op == "$ne":
        return v is _MISSING or not _eq(v, operand)
    if op == "$nin":
        return v is _MISSING or not any(_eq(v, x) for x in operand)
    if v is _MISSING:
        return False
    if op == "$eq":
        return _eq(v, operand)
    if op == "$in":
        return any(_eq(v, x) for x in operand)
    comparable = (_num(v) and _num(operand)) or (type(v) is str and type(operand) is str)
    if not comparable:
        return False
    return {
        "$gt": v > operand,
        "$gte": v >= operand,
        "$lt": v < operand,
        "$lte": v <= operand,
    }[op]


# --- random generators --------------------------------------------------------------

KEYS = ["a", "b", "c", "p", "N", "kT", "seed", "é", "Z"]
STRINGS = ["", "abc", "abd", "x", "ß", "10", "true"]


def random_scalar(rng: random.Random):
    kind = rng.randrange(6)
    if kind == 0:
        return rng.randint(-5, 5)
    if kind == 1:
        return rng.choice([-1.5, 0.0, 0.1, 1.0, 2.0, 2.5, 10.0, 1e-7, 3.0])
    if kind == 2:
        return rng.choice(STRINGS)
    if kind == 3:
        return rng.choice([True, False])
    if kind == 4:
        return None
    return rng.choice([0, 1, 2, 10])


def random_value(rng: random.Random, depth: int = 0):
    r = rng.random()
    if depth < 2 and r < 0.15:
        return random_doc(rng, depth + 1, max_keys=3)
    if depth < 2 and r < 0.25:
        return [random_value(rng, depth + 1) for _ in range(rng.randrange(3))]
    return random_scalar(rng)


def random_doc(rng: random.Random, depth: int = 0, max_keys: int = 6) -> dict:
    return {k: random_value(rng, depth) for k in rng.sample(KEYS, rng.randrange(max_keys + 1))}


def random_path(rng: random.Random) -> str:
    return ".".join(rng.choice(KEYS) for _ in range(rng.choice([1, 1, 1, 2])))


def random_field_filter(rng: random.Random) -> dict:
    path = random_path(rng)
    op = rng.choice(["$eq", "$ne", "$gt", "$gte", "$lt", "$lte", "$in", "$nin", "$exists", "bare", "dotted"])
    if op == "bare":
        return {path: random_scalar(rng)}
    if op == "dotted":
        sub = rng.choice(["$gt", "$lte", "$ne", "$eq"])
        return {f"{path}.{sub}": random_scalar(rng)}
    if op in ("$in", "$nin"):
        return {path: {op: [random_scalar(rng) for _ in range(rng.randrange(4))]}}
    if op == "$exists":
        return {path: {op: rng.choice([True, False])}}
    return {path: {op: random_scalar(rng)}}


def random_filter(rng: random.Random, depth: int = 0) -> dict:
    r = rng.random()
    if depth < 3 and r < 0.15:
        return {"$and": [random_filter(rng, depth + 1) for _ in range(rng.randint(1, 3))]}
    if depth < 3 and r < 0.3:
        return {"$or": [random_filter(rng, depth + 1) for _ in range(rng.randint(1, 3))]}
    if depth < 3 and r < 0.38:
        return {"$not": random_filter(rng, depth + 1)}
    if r < 0.45:
        # several fields combined implicitly
        out = {}
        for _ in range(rng.randint(2, 3)):
            out.update(random_field_filter(rng))
        return out
    return random_field_filter(rng)


def random_statepoint(rng: random.Random, depth: int = 0) -> dict:
    """Random valid state point; keys never contain '.'."""
    letters = string.ascii_letters + "_é"
    out = {}
    for _ in range(rng.randrange(1, 7)):
        key = "".join(rng.choices(letters, k=rng.randint(1, 4)))
        r = rng.random()
        if depth < 2 and r < 0.15:
            out[key] = random_statepoint(rng, depth + 1)
        elif r < 0.25:
            out[key] = [rng.randint(-100, 100) for _ in range(rng.randrange(4))]
        elif r < 0.5:
            out[key] = rng.randint(-(10**12), 10**12)
        elif r < 0.75:
            out[key] = rng.uniform(-1e6, 1e6)
        elif r < 0.9:
            out[key] = "".join(rng.choices(letters, k=rng.randrange(8)))
        else:
            out[key] = rng.choice([True, False, None])
    return out


def shuffled(sp, rng: random.Random):
    """Same structure, different insertion order at every level."""
    if isinstance(sp, dict):
        items = list(sp.items())
        rng.shuffle(items)
        return {k: shuffled(v, rng) for k, v in items}
    if isinstance(sp, list):
        return [shuffled(v, rng) for v in sp]
    return sp
