from __future__ import annotations

import json


class LogSink:
    """Collects records for packets whose verdict is Log; optionally mirrors them to a JSON Lines file."""

    def __init__(self, path=None):
        self.records = []
        self.path = path
        self._fh = open(path, "w") if path else None

    def __call__(self, entry):
        return self.append(entry)

    def append(self, entry):
        rec = dict(entry)
        self.records.append(rec)
        if self._fh:
            self._fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return rec

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None


def logger_sink(sink: LogSink, pkt, now, branch):
    return sink.append({"ts": now, "sip": pkt.key.sip, "sport": pkt.key.sport,
                        "proto": pkt.key.proto, "flow": pkt.flow, "branch": branch})
