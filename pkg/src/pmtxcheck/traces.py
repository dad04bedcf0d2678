"""JSON-lines trace files: one record per line, canonical field order.

Record kinds:

* ``inv`` / ``res`` -- operation invocation/response; carry era, seq, tid,
  txid, op, and loc/val exactly where the operation has them (read
  responses carry loc and val, write records both, alloc responses loc,
  begin/commit/abort neither).
* ``crash`` -- carries only era and seq.
* ``fault-hidden-note`` -- marks where the run entered the fault regime;
  carries only era and seq (the remainder of the trace is not claimed).

Unknown fields and fields not allowed for a record's kind/op are rejected
with the offending line number.  ``parse -> emit`` is byte-stable.
"""

from __future__ import annotations

import json

FIELD_ORDER = ("kind", "era", "seq", "tid", "txid", "op", "loc", "val")
OPS = ("begin", "read", "write", "alloc", "commit", "abort")


class TraceError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        if line is not None:
            msg = "line %d: %s" % (line, msg)
        super().__init__(msg)


def _loc_val_fields(kind, op):
    """Which of loc/val a record must carry."""
    if op == "read":
        return ("loc",) if kind == "inv" else ("loc", "val")
    if op == "write":
        return ("loc", "val")
    if op == "alloc":
        return () if kind == "inv" else ("loc",)
    return ()


def records_to_dicts(records):
    """Internal record tuples -> canonical JSON-ready dicts."""
    out = []
    era = 0
    for seq, rec in enumerate(records):
        kind = rec[0]
        if kind == "crash":
            out.append({"kind": "crash", "era": era, "seq": seq})
            era += 1
            continue
        if kind == "fault":
            out.append({"kind": "fault-hidden-note", "era": era,
                        "seq": seq})
            continue
        _k, txid, op, loc, val = rec
        d = {"kind": kind, "era": era, "seq": seq, "tid": txid,
             "txid": txid, "op": op}
        fields = _loc_val_fields(kind, op)
        if "loc" in fields:
            d["loc"] = loc
        if "val" in fields:
            d["val"] = val
        out.append(d)
    return out


def dicts_to_records(dicts):
    """Canonical dicts -> internal record tuples (validation already done)."""
    out = []
    for d in dicts:
        kind = d["kind"]
        if kind == "crash":
            out.append(("crash",))
        elif kind == "fault-hidden-note":
            # location/op of the fault are not serialized; the note only
            # marks that the remainder of the run is unchecked
            out.append(("fault", None, None, None))
        else:
            out.append((kind, d["txid"], d["op"], d.get("loc"),
                        d.get("val")))
    return tuple(out)


def emit_trace(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for d in records_to_dicts(records):
            ordered = {k: d[k] for k in FIELD_ORDER if k in d}
            fh.write(json.dumps(ordered, separators=(",", ":")) + "\n")


def parse_trace(path):
    """Parse a trace file back into record tuples; strict field checking."""
    dicts = []
    era = 0
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError("malformed JSON (%s)" % exc, ln) from None
            if not isinstance(d, dict):
                raise TraceError("record is not an object", ln)
            kind = d.get("kind")
            if kind in ("crash", "fault-hidden-note"):
                allowed = {"kind", "era", "seq"}
            elif kind in ("inv", "res"):
                op = d.get("op")
                if op not in OPS:
                    raise TraceError("bad op %r" % (op,), ln)
                if kind == "inv" and op == "abort":
                    raise TraceError("abort is response-only", ln)
                allowed = {"kind", "era", "seq", "tid", "txid", "op"}
                allowed.update(_loc_val_fields(kind, op))
            else:
                raise TraceError("bad kind %r" % (kind,), ln)
            extra = set(d) - allowed
            if extra:
                raise TraceError("unexpected field(s) %s"
                                 % ", ".join(sorted(extra)), ln)
            missing = allowed - set(d)
            if missing:
                raise TraceError("missing field(s) %s"
                                 % ", ".join(sorted(missing)), ln)
            for f in ("era", "seq", "tid", "txid", "loc", "val"):
                if f in d and not isinstance(d[f], int):
                    raise TraceError("field %s must be an integer" % f, ln)
            if d["era"] != era:
                raise TraceError("era %r out of sequence" % (d["era"],), ln)
            if kind == "crash":
                era += 1
            if dicts and d["seq"] <= dicts[-1]["seq"]:
                raise TraceError("seq not strictly increasing", ln)
            dicts.append(d)
    return dicts_to_records(dicts)
