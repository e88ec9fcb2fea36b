"""Builders for small hand-written event logs."""

import json


def make_log(records):
    """Encode records as an event-log byte stream (one compact JSON object per line)."""
    return b"".join(
        (json.dumps(r, separators=(",", ":")) + "\n").encode("utf-8") for r in records
    )


def write(item, t, length=100, order=None, **extra):
    record = {"item": item, "t": t, "action": "write", "length": length}
    if order is not None:
        record["order"] = order
    record.update(extra)
    return record


def vote(item, t, response, polarity, order, **extra):
    record = {"item": item, "t": t, "action": "vote", "response": response,
              "polarity": polarity, "order": order}
    record.update(extra)
    return record


def gap(item, t, missing):
    return {"item": item, "t": t, "action": "gap", "votes_missing": missing}


def single_response_log(item, polarities, t0=1):
    """One response followed by votes in the given polarity order."""
    records = [write(item, t0)]
    for k, polarity in enumerate(polarities):
        records.append(vote(item, t0 + k + 1, 0, polarity, [0]))
    return records


def writes_only(item, n, length=100):
    """An item whose history is ``n`` writes."""
    return [write(item, t, length=length, order=list(range(t - 1))) for t in range(1, n + 1)]
