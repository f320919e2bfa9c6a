import json
import shlex
import subprocess
import sys

import numpy as np
import pytest

from conftest import serve_cmd
from modelhost.hosting import load_model


class HostProc:
    """Minimal raw-protocol driver (no client-side conveniences)."""

    def __init__(self, model_path):
        self.proc = subprocess.Popen(
            shlex.split(serve_cmd(model_path)),
            stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1)

    def send(self, obj):
        self.proc.stdin.write(json.dumps(obj) + "\n")
        self.proc.stdin.flush()

    def send_raw(self, text):
        self.proc.stdin.write(text + "\n")
        self.proc.stdin.flush()

    def recv(self):
        line = self.proc.stdout.readline()
        assert line, "host closed stdout unexpectedly"
        return json.loads(line)

    def shutdown(self):
        self.send({"op": "shutdown"})
        return self.proc.wait(timeout=20)


@pytest.fixture
def host(trained_rf):
    h = HostProc(trained_rf["model"])
    yield h
    if h.proc.poll() is None:
        h.proc.kill()


def test_hello_reports_dimensionality(host, trained_rf):
    host.send({"op": "hello"})
    assert host.recv() == {"op": "hello", "m": trained_rf["m"]}
    assert host.shutdown() == 0


def test_predict_preserves_count_and_order(host, trained_rf):
    _, est = load_model(str(trained_rf["model"]))
    rng = np.random.default_rng(4)
    X = rng.normal(size=(7, trained_rf["m"]))
    host.send({"op": "predict", "x": X.tolist()})
    reply = host.recv()
    assert reply["op"] == "predict" and len(reply["y"]) == 7
    assert np.allclose(reply["y"], est.predict(X), atol=0)
    assert host.shutdown() == 0


def test_shutdown_exits_zero(host):
    assert host.shutdown() == 0


def test_malformed_request_keeps_process_alive(host, trained_rf):
    host.send_raw("this is not json")
    reply = host.recv()
    assert reply["op"] == "error"
    host.send({"op": "hello"})
    assert host.recv()["m"] == trained_rf["m"]
    assert host.shutdown() == 0


def test_unknown_op_is_error_reply(host):
    host.send({"op": "train"})
    assert host.recv()["op"] == "error"
    assert host.shutdown() == 0


def test_wrong_width_is_error_reply(host):
    host.send({"op": "predict", "x": [[1.0, 2.0]]})
    assert host.recv()["op"] == "error"
    assert host.shutdown() == 0


def test_one_json_object_per_line(host):
    host.send({"op": "hello"})
    line = host.proc.stdout.readline()
    assert line.endswith("\n") and "\n" not in line[:-1]
    json.loads(line)  # parses standalone
    assert host.shutdown() == 0


def test_replies_flushed_promptly(host):
    # ten pipelined requests answered in order without closing stdin
    for k in range(10):
        host.send({"op": "hello"})
        assert host.recv() == {"op": "hello", "m": 5}
    assert host.shutdown() == 0
