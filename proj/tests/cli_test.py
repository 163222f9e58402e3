"""End-to-end checks of the persalign command-line tool.

Usage: python3 cli_test.py /path/to/persalign
"""

import http.server
import json
import os
import subprocess
import sys
import tempfile
import threading
import unittest

CLI = None


def run(*args, expect=0):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, timeout=300)
    if proc.returncode != expect:
        raise AssertionError(
            f"{args}: exit {proc.returncode}, wanted {expect}\nstdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def error_record(proc):
    line = proc.stderr.strip().splitlines()[0]
    rec = json.loads(line)
    assert set(rec) == {"error", "message"}, rec
    return rec


def jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


class Stub(http.server.BaseHTTPRequestHandler):
    """Answers the responder, filter and embedding protocols on one port."""

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if self.path == "/respond":
            out = json.dumps({"value": float(len(body["persona"]) % 7)})
        elif self.path == "/filter":
            out = "YES" if body["candidate"].endswith("1") else "NO"
        elif self.path == "/embed":
            out = json.dumps({"embedding": [1.0, 0.0, 0.0]})
        else:
            self.send_response(404)
            self.end_headers()
            return
        data = out.encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = cls.tmp.name
        run("simulate", "--preset", "shifted-gaussian", "--dims", 3, "--n-pool", 4000,
            "--n-reference", 600, "--seed", 5, "--out-dir", cls.dir)
        cls.server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Stub)
        cls.url = f"http://127.0.0.1:{cls.server.server_address[1]}"
        threading.Thread(target=cls.server.serve_forever, daemon=True).start()

    @classmethod
    def tearDownClass(cls):
        cls.server.shutdown()
        cls.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.dir, name)

    def align_args(self, *extra):
        return ["align", "--pool", self.path("pool.jsonl"), "--reference", self.path("reference.jsonl"),
                "--personas", self.path("personas.jsonl"), "--n-candidates", 1200, "--n-final", 600,
                "--seed", 9, *extra]

    def test_simulate_outputs(self):
        for name in ("pool.jsonl", "reference.jsonl", "personas.jsonl", "items.jsonl"):
            self.assertTrue(os.path.exists(self.path(name)), name)
        self.assertEqual(len(jsonl(self.path("personas.jsonl"))), 4000)

    def test_metrics_of_a_file_with_itself(self):
        out = json.loads(run("metrics", self.path("reference.jsonl"), self.path("reference.jsonl")).stdout)
        for key in ("amw", "fd", "sw", "mmd_squared"):
            self.assertLessEqual(abs(out[key]), 1e-12, key)

    def test_align_then_metrics(self):
        sel, ids = self.path("sel.jsonl"), self.path("ids.txt")
        report = json.loads(run(*self.align_args("--selection-out", sel, "--ids-out", ids)).stdout)
        self.assertEqual(report["sizes"]["n_final"], 600)
        for key in ("amw", "fd", "sw", "mmd_squared"):
            self.assertLess(report["metrics_after"][key], report["metrics_before"][key], key)
        with open(ids, encoding="utf-8") as f:
            chosen = f.read().split()
        self.assertEqual(len(chosen), 600)
        self.assertEqual(sum(r["count"] for r in jsonl(sel)), 600)
        self.assertNotIn("timings_seconds", report)

        # Rebuild the aligned responses and score them with the metrics command.
        pool = {}
        with open(self.path("pool.jsonl"), encoding="utf-8") as f:
            header = f.readline()
            for line in f:
                rec = json.loads(line)
                pool[rec["id"]] = line
        aligned = self.path("aligned.jsonl")
        with open(aligned, "w", encoding="utf-8") as f:
            f.write(header)
            for k, pid in enumerate(chosen):
                row = json.loads(pool[pid])
                row["id"] = f"{pid}#{k}"
                f.write(json.dumps(row) + "\n")
        after = json.loads(run("metrics", aligned, self.path("reference.jsonl")).stdout)
        self.assertLess(after["amw"], report["metrics_before"]["amw"])

    def test_align_is_deterministic(self):
        a = run(*self.align_args()).stdout
        b = run(*self.align_args()).stdout
        self.assertEqual(a, b)
        c = run(*self.align_args("--timings")).stdout
        self.assertIn("timings_seconds", json.loads(c))

    def test_config_file_and_flag_precedence(self):
        cfg = self.path("cfg.json")
        with open(cfg, "w") as f:
            json.dump({"n_is_candidates": 1200, "n_final": 300, "seed": 9}, f)
        report = json.loads(run("align", "--pool", self.path("pool.jsonl"), "--reference",
                                self.path("reference.jsonl"), "--config", cfg).stdout)
        self.assertEqual(report["sizes"]["n_final"], 300)
        report = json.loads(run("align", "--pool", self.path("pool.jsonl"), "--reference",
                                self.path("reference.jsonl"), "--config", cfg, "--n-final", 200).stdout)
        self.assertEqual(report["sizes"]["n_final"], 200)
        with open(cfg, "w") as f:
            json.dump({"bandwith": 0.3}, f)
        rec = error_record(run("align", "--pool", self.path("pool.jsonl"), "--reference",
                               self.path("reference.jsonl"), "--config", cfg, expect=1))
        self.assertEqual(rec["error"], "SchemaError")

    def test_align_rejects_n_final_above_candidates(self):
        proc = run("align", "--pool", self.path("pool.jsonl"), "--reference", self.path("reference.jsonl"),
                   "--n-candidates", 100, "--n-final", 200, expect=1)
        rec = error_record(proc)
        self.assertEqual(rec["error"], "InvalidConfig")
        self.assertIn("stage validate", rec["message"])
        self.assertEqual(proc.stdout, "")

    def test_usage_errors(self):
        self.assertEqual(error_record(run(expect=2))["error"], "UsageError")
        self.assertEqual(error_record(run("align", "--pool", self.path("pool.jsonl"), expect=2))["error"],
                         "UsageError")
        self.assertEqual(error_record(run("frobnicate", expect=2))["error"], "UsageError")
        self.assertEqual(error_record(run("metrics", self.path("missing.jsonl"), self.path("reference.jsonl"),
                                          expect=2))["error"], "UsageError")

    def test_malformed_input_names_the_line(self):
        bad = self.path("bad.jsonl")
        with open(bad, "w") as f:
            f.write('{"items": ["a", "b"]}\n{"id": "x", "responses": [1, 2]}\n{"id": "y", "responses": [1]}\n')
        rec = error_record(run("metrics", bad, bad, expect=1))
        self.assertEqual(rec["error"], "SchemaError")
        self.assertIn("line 3", rec["message"])

    def test_collect_synthetic_and_http(self):
        personas, items = self.path("few_personas.jsonl"), self.path("items.jsonl")
        with open(self.path("personas.jsonl"), encoding="utf-8") as src, open(personas, "w") as dst:
            for _ in range(5):
                dst.write(src.readline())
        out = self.path("collected.jsonl")
        run("collect", "--personas", personas, "--items", items, "--synthetic", "--seed", 1, "--out", out)
        rows = jsonl(out)
        self.assertEqual(len(rows), 6)
        width = len(rows[0]["items"])
        self.assertTrue(all(len(r["responses"]) == width for r in rows[1:]))
        again = self.path("collected2.jsonl")
        run("collect", "--personas", personas, "--items", items, "--synthetic", "--seed", 1, "--out", again)
        with open(out) as a, open(again) as b:
            self.assertEqual(a.read(), b.read())

        http_out = self.path("collected_http.jsonl")
        run("collect", "--personas", personas, "--items", items, "--endpoint", self.url + "/respond",
            "--out", http_out)
        self.assertEqual(len(jsonl(http_out)), 6)
        rec = error_record(run("collect", "--personas", personas, "--items", items, "--endpoint",
                               self.url + "/nowhere", "--config", self.write_config({"retries": 0}), expect=1))
        self.assertEqual(rec["error"], "ResponderFailure")

    def write_config(self, doc):
        path = self.path("tool_config.json")
        with open(path, "w") as f:
            json.dump(doc, f)
        return path

    def write_embeddings(self):
        path = self.path("emb.jsonl")
        with open(path, "w") as f:
            for i in range(30):
                vec = [1.0, 0.05 * i, (-1.0) ** i * 0.01 * i]
                f.write(json.dumps({"id": f"p{i}", "embedding": vec}) + "\n")
        return path

    def test_retrieve(self):
        emb = self.write_embeddings()
        out = jsonl_from_stdout(run("retrieve", "--embeddings", emb, "--query", "1,0,0", "-k", 3))
        self.assertEqual([r["id"] for r in out], ["p0", "p1", "p2"])
        self.assertGreaterEqual(out[0]["score"], out[1]["score"])
        via_http = jsonl_from_stdout(run("retrieve", "--embeddings", emb, "--query-text", "anyone",
                                         "--embed-endpoint", self.url + "/embed", "-k", 3))
        self.assertEqual(via_http, out)
        rec = error_record(run("retrieve", "--embeddings", emb, "--query", "1,0,0", "-k", 31, expect=1))
        self.assertEqual(rec["error"], "KOutOfRange")

    def test_pairs(self):
        emb = self.write_embeddings()
        queries = self.path("queries.jsonl")
        with open(queries, "w") as f:
            for i in (0, 10, 20):
                f.write(json.dumps({"query_id": f"q{i}", "embedding": [1.0, 0.05 * i, 0.0],
                                    "source_id": f"p{i}"}) + "\n")
        out = self.path("pairs.jsonl")
        run("pairs", "--embeddings", emb, "--queries", queries, "--n-hard", 3, "--n-random", 2, "--seed", 4,
            "--out", out)
        pairs = jsonl(out)
        self.assertEqual(len(pairs), 3)
        for p in pairs:
            self.assertNotIn(p["positive_id"], p["negative_ids"])
            self.assertEqual(len(p["negative_ids"]), 5)
        texts, personas = self.path("query_texts.jsonl"), self.path("emb_personas.jsonl")
        with open(texts, "w") as f:
            for i in (0, 10, 20):
                f.write(json.dumps({"id": f"q{i}", "text": f"query {i}"}) + "\n")
        with open(personas, "w") as f:
            for i in range(30):
                f.write(json.dumps({"id": f"p{i}", "narrative": f"persona p{i}"}) + "\n")
        filtered = self.path("pairs_filtered.jsonl")
        run("pairs", "--embeddings", emb, "--queries", queries, "--n-hard", 3, "--n-random", 2, "--seed", 4,
            "--filter-endpoint", self.url + "/filter", "--query-texts", texts, "--personas", personas,
            "--out", filtered)
        for p in jsonl(filtered):
            self.assertFalse(any(n.endswith("1") for n in p["negative_ids"]), p)

    def test_sweep_table(self):
        table, out = self.path("sweep.tsv"), self.path("sweep.jsonl")
        run("sweep", "--n-grid", "200,2000", "--n-reference", 300, "--n-candidates", 300, "--repetitions", 3,
            "--table", table, "--out", out)
        with open(table) as f:
            lines = f.read().strip().splitlines()
        self.assertEqual(lines[0].split("\t")[:2], ["bandwidth", "n_pool"])
        self.assertEqual(len(lines), 3)
        records = jsonl(out)
        self.assertIn("trend_holds", records[-1])
        self.assertEqual(len(records[0]["w1"]), 3)
        rec = error_record(run("sweep", "--n-grid", "200", "--repetitions", 2, expect=1))
        self.assertEqual(rec["error"], "InvalidConfig")


def jsonl_from_stdout(proc):
    return [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]


if __name__ == "__main__":
    CLI = os.path.abspath(sys.argv.pop(1))
    unittest.main(verbosity=2)
