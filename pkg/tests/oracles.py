"""Independent brute-force implementations used as test oracles."""
from __future__ import annotations


def field_of(s, fld):
    return {"val": s.value, "nid": s.nid, "date": s.epoch_time, "time": s.epoch_time}[fld]


def naive_query(text, store):
    """Evaluate a lite query by plain scanning, written without reference to
    the evaluator under test. Returns ("rows", [...]) / ("scalar", x) /
    ("boolean", b)."""
    toks = text.split("_")
    task, fld = toks[0].split(".")
    cmp = toks[1]
    conv = str if fld == "nid" else float
    a = conv(toks[2])
    rest = toks[3:]
    b = None
    if cmp == "bet":
        b = conv(rest[1])
        rest = rest[2:]
    limit = order = agg = None
    while rest:
        t = rest.pop(0)
        if t == "limit":
            limit = int(rest.pop(0))
        elif t in ("asc", "dsc", "desc"):
            order = "dsc" if t != "asc" else "asc"
        else:
            agg = t

    def ok(v):
        if cmp == "gt":
            return v > a
        if cmp == "lt":
            return v < a
        if cmp == "lte":
            return v <= a
        if cmp in ("eq", "in"):
            return v == a
        if cmp == "neq":
            return v != a
        lo, hi = min(a, b), max(a, b)
        return lo <= v <= hi

    hits = []
    for s in store:
        if s.task == task and ok(field_of(s, fld)):
            hits.append(s)
    if cmp == "in":
        return ("boolean", len(hits) > 0)
    # insertion sort by (time, nid) then by field, keeping ties stable
    ordered = []
    for s in hits:
        k = (s.epoch_time, s.nid)
        i = len(ordered)
        while i > 0 and (ordered[i - 1].epoch_time, ordered[i - 1].nid) > k:
            i -= 1
        ordered.insert(i, s)
    if order is not None:
        out = []
        for s in ordered:
            v = field_of(s, fld)
            i = len(out)
            if order == "asc":
                while i > 0 and field_of(out[i - 1], fld) > v:
                    i -= 1
            else:
                while i > 0 and field_of(out[i - 1], fld) < v:
                    i -= 1
            out.insert(i, s)
        ordered = out
    if limit is not None:
        ordered = ordered[:limit]
    if agg == "count":
        return ("scalar", len(ordered))
    if agg in ("avg", "min", "max"):
        if not ordered:
            return ("scalar", None)
        vals = [s.value for s in ordered]
        if agg == "avg":
            return ("scalar", sum(vals) / len(vals))
        return ("scalar", min(vals) if agg == "min" else max(vals))
    return ("rows", ordered)


def eq4(n_cn_h, neighbours):
    """Closed-form sync receiver count; ``neighbours`` is a list of
    (a_i, n_cn_i) for the CHs in range of h."""
    return n_cn_h + len(neighbours) + sum(a * n for a, n in neighbours)
