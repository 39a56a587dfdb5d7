#!/usr/bin/env python3
"""Command-line checks: reports, stdin protocols, exit codes, converter.

usage: test_cli.py <path to ddemgm binary> <path to convert_uci.py>
"""

import json
import math
import os
import random
import subprocess
import sys
import tempfile
import unittest

BIN = None
CONVERTER = None


def run(*args, stdin=None):
    return subprocess.run([BIN, *args], input=stdin, capture_output=True, text=True, timeout=300)


def records(text):
    out = []
    for line in text.splitlines():
        rec = {}
        for pair in line.split(" "):
            key, _, value = pair.partition("=")
            rec[key] = value
        out.append(rec)
    return out


def wave_rows(rng, sid, label, period, amp, n, dim=2):
    phase = rng.uniform(0, 2 * math.pi)
    base = rng.uniform(-20, 20)
    rows = []
    for t in range(n):
        a = 2 * math.pi * t / period + phase
        vals = [base + amp * math.sin(a + 0.7 * k) + rng.gauss(0, 0.02) for k in range(dim)]
        rows.append((sid, label, vals))
    return rows


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        rng = random.Random(5)
        rows = []
        for i in range(6):
            rows += wave_rows(rng, f"slow{i}", "slow", 40, 1.0, rng.randint(300, 500))
            rows += wave_rows(rng, f"fast{i}", "fast", 17, 1.5, rng.randint(300, 500))
        cls.rows = rows
        cls.csv = os.path.join(cls.tmp.name, "data.csv")
        with open(cls.csv, "w") as f:
            f.write("series_id,label,v1,v2\n")
            for sid, label, vals in rows:
                f.write(f"{sid},{label},{vals[0]!r},{vals[1]!r}\n")
        cls.model = os.path.join(cls.tmp.name, "model.txt")
        res = run("train", "--input", cls.csv, "--s", "4", "--d", "3", "--bins", "20", "--model", cls.model)
        assert res.returncode == 0, res.stderr

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_train_report_and_model_header(self):
        with open(self.model) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "DDEMGM 1")
        self.assertTrue(lines[1].startswith("config n=2 s=4 d=3 tau=1 r=1 cells="))
        self.assertRegex(lines[-1], r"^checksum [0-9a-f]{8}$")
        self.assertEqual(sum(1 for l in lines if l.startswith("class ")), 2)

    def test_classify_csv_predicts_every_series(self):
        res = run("classify", "--model", self.model, "--input", self.csv)
        self.assertEqual(res.returncode, 0, res.stderr)
        recs = [r for r in records(res.stdout) if r["report"] == "prediction"]
        self.assertEqual(len(recs), 12)
        correct = sum(r["predicted"] == r["label"] for r in recs)
        self.assertGreaterEqual(correct, 11)

    def test_classify_stdin_matches_csv(self):
        by_csv = records(run("classify", "--model", self.model, "--input", self.csv).stdout)
        series = {}
        for sid, _, vals in self.rows:
            series.setdefault(sid, []).append(vals)
        text = "\n\n".join("\n".join(f"{a!r},{b!r}" for a, b in s) for s in series.values()) + "\n"
        res = run("classify", "--model", self.model, "--stdin", stdin=text)
        self.assertEqual(res.returncode, 0, res.stderr)
        by_stdin = records(res.stdout)
        self.assertEqual([r["predicted"] for r in by_stdin], [r["predicted"] for r in by_csv])
        self.assertEqual([r["t"] for r in by_stdin], [r["t"] for r in by_csv])

    def test_emit_every_reports_progress(self):
        series = [v for sid, _, v in self.rows if sid == "slow0"]
        text = "\n".join(f"{a!r},{b!r}" for a, b in series) + "\n"
        res = run("classify", "--model", self.model, "--stdin", "--emit-every", "50", stdin=text)
        recs = records(res.stdout)
        progress = [r for r in recs if r["report"] == "progress"]
        self.assertTrue(progress)
        self.assertTrue(all(int(r["t"]) % 50 == 0 for r in progress))
        self.assertEqual(recs[-1]["report"], "prediction")

    def test_train_stdin_equals_csv(self):
        text_parts, last = [], None
        for sid, label, vals in self.rows:
            if last is not None and sid != last:
                text_parts.append("")
            text_parts.append(f"{label},{vals[0]!r},{vals[1]!r}")
            last = sid
        text = "\n".join(text_parts) + "\n"
        out = self.path("stdin_model.txt")
        res = run("train", "--stdin", "--s", "4", "--d", "3", "--bins", "20", "--model", out, stdin=text)
        self.assertEqual(res.returncode, 0, res.stderr)
        with open(out) as a, open(self.model) as b:
            self.assertEqual(a.read(), b.read())

    def test_train_stdin_streams_with_fixed_cells(self):
        with open(self.model) as f:
            cells = f.read().splitlines()[1].split("cells=")[1].split(",")[:2]
        text_parts, last = [], None
        for sid, label, vals in self.rows:
            if last is not None and sid != last:
                text_parts.append("")
            text_parts.append(f"{label},{vals[0]!r},{vals[1]!r}")
            last = sid
        out = self.path("streamed.txt")
        res = run("train", "--stdin", "--s", "4", "--d", "3", "--cells", ",".join(cells), "--model", out,
                  stdin="\n".join(text_parts) + "\n")
        self.assertEqual(res.returncode, 0, res.stderr)
        with open(out) as a, open(self.model) as b:
            self.assertEqual(a.read(), b.read())

    def test_json_lines(self):
        res = run("--json", "eval", "--input", self.csv, "--protocol", "holdout50", "--seed", "2",
                  "--s", "4", "--d", "3", "--bins", "20")
        self.assertEqual(res.returncode, 0, res.stderr)
        recs = [json.loads(l) for l in res.stdout.splitlines()]
        summary = recs[-1]
        self.assertEqual(summary["report"], "eval")
        confusion = [r for r in recs if r["report"] == "confusion"]
        self.assertEqual(sum(r["count"] for r in confusion), summary["evaluated"])
        diag = sum(r["count"] for r in confusion if r["label"] == r["predicted"])
        self.assertEqual(summary["accuracy"], diag / summary["evaluated"])

    def test_eval_is_reproducible_and_parallel_agrees(self):
        args = ["eval", "--input", self.csv, "--protocol", "online", "--seed", "9", "--bins", "20"]
        a = records(run(*args).stdout)
        b = records(run(*args).stdout)
        c = records(run(*args, "--parallel").stdout)
        strip = lambda rs: [{k: v for k, v in r.items() if k not in ("wall_seconds", "parallel")} for r in rs]
        self.assertEqual(strip(a), strip(b))
        self.assertEqual(strip(a), strip(c))
        self.assertEqual(a[-1]["excluded"], "2")
        self.assertEqual(len([r for r in a if r["report"] == "curve"]), int(a[-1]["evaluated"]))

    def test_select_params(self):
        res = run("select-params", "--input", self.csv, "--per-class", "3", "--bins", "50")
        self.assertEqual(res.returncode, 0, res.stderr)
        recs = records(res.stdout)
        self.assertEqual(recs[-1]["report"], "select-params")
        self.assertEqual(len([r for r in recs if r["report"] == "class"]), 2)
        self.assertEqual(len([r for r in recs if r["report"] == "series"]), 6)

    def test_bench_needs_long_series(self):
        res = run("bench", "--input", self.csv)
        self.assertEqual(res.returncode, 3)
        long_csv = self.path("long.csv")
        with open(long_csv, "w") as f:
            f.write("series_id,label,v1\n")
            for t in range(10000):
                f.write(f"l,x,{math.sin(t / 7.0)!r}\n")
        res = run("bench", "--input", long_csv, "--bins-sweep", "20,60", "--repeats", "1")
        self.assertEqual(res.returncode, 0, res.stderr)
        recs = records(res.stdout)
        self.assertEqual([r["bins"] for r in recs], ["20", "60"])
        for r in recs:
            self.assertAlmostEqual(float(r["rate"]), int(r["points"]) / float(r["seconds"]), delta=1e-6 * float(r["rate"]))

    def test_exit_codes(self):
        bad = self.path("bad.csv")
        with open(bad, "w") as f:
            f.write("series_id,label,v1\na,x,1\na,x,oops\n")
        res = run("select-params", "--input", bad)
        self.assertEqual(res.returncode, 2)
        self.assertIn(":3:", res.stderr)

        self.assertEqual(run("select-params").returncode, 2)
        self.assertEqual(run("eval", "--input", self.csv, "--protocol", "sometimes", "--seed", "1").returncode, 2)

        with open(self.model) as f:
            text = f.read()
        damaged = self.path("damaged.txt")
        with open(damaged, "w") as f:
            f.write(text[: len(text) // 2])
        self.assertEqual(run("classify", "--model", damaged, "--input", self.csv).returncode, 2)
        with open(damaged, "w") as f:
            f.write(text.replace("class fast", "class fasT", 1))
        self.assertEqual(run("classify", "--model", damaged, "--input", self.csv).returncode, 2)

        one = self.path("one.csv")
        with open(one, "w") as f:
            f.write("series_id,label,v1\na,x,1\na,x,2\nb,y,3\nb,y,4\n")
        self.assertEqual(run("eval", "--input", one, "--protocol", "holdout50", "--seed", "1",
                             "--s", "1", "--d", "1").returncode, 3)
        self.assertEqual(run("classify", "--model", self.model, "--input", one).returncode, 3)
        self.assertEqual(run("classify", "--model", self.model, "--stdin", stdin="1,2\n1,2,3\n").returncode, 2)
        self.assertEqual(run("train", "--input", self.csv, "--stdin", "--model", self.path("x")).returncode, 3)


@unittest.skipUnless(__import__("importlib").util.find_spec("scipy"), "scipy not installed")
class ConverterTest(unittest.TestCase):
    def test_synthetic_mat_round_trip(self):
        import numpy as np
        import scipy.io

        rng = np.random.default_rng(3)
        trajs, labels = [], []
        for i in range(6):
            t = rng.integers(20, 40)
            m = rng.normal(size=(3, t))
            m = np.concatenate([m, np.zeros((3, 5))], axis=1)
            trajs.append(m)
            labels.append(1 + i % 3)
        mixout = np.empty((1, len(trajs)), dtype=object)
        for i, m in enumerate(trajs):
            mixout[0, i] = m
        key = np.empty((1, 3), dtype=object)
        for i, c in enumerate("abc"):
            key[0, i] = c
        with tempfile.TemporaryDirectory() as tmp:
            mat = os.path.join(tmp, "mixout.mat")
            scipy.io.savemat(mat, {"mixout": mixout,
                                   "consts": {"charlabels": np.array([labels]), "key": key}})
            out = os.path.join(tmp, "out.csv")
            res = subprocess.run([sys.executable, CONVERTER, mat, out], capture_output=True, text=True)
            self.assertEqual(res.returncode, 0, res.stderr)
            with open(out) as f:
                lines = f.read().splitlines()
            self.assertEqual(lines[0], "series_id,label,v1,v2,v3")
            self.assertEqual(len(lines) - 1, sum(m.shape[1] - 5 for m in trajs))
            first = lines[1].split(",")
            self.assertEqual(first[:2], ["traj0001", "a"])
            self.assertEqual(float(first[2]), trajs[0][0, 0])
            res = run("select-params", "--input", out, "--per-class", "2")
            self.assertNotEqual(res.returncode, 2, res.stderr)


if __name__ == "__main__":
    BIN, CONVERTER = sys.argv[1], sys.argv[2]
    unittest.main(argv=[sys.argv[0], "-v"])
