"""End-to-end checks of the tracecurate command line: stage chaining, exit
codes and the JSON error envelope."""

import json
import os
import subprocess
import sys
import tempfile

BIN = sys.argv[1]
failures = []


def run(*args, env=None):
    e = dict(os.environ)
    e["SOURCE_DATE_EPOCH"] = "1700000000"
    if env:
        e.update(env)
    return subprocess.run([BIN, *args], capture_output=True, text=True, env=e)


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def record(i, pieces, criteria, independent, boxed=True):
    parts = ["First, set up the equation."]
    openers = ["Alternatively, factor it.", "Another approach: substitute.",
               "Let me try another route here."]
    for k in range(pieces - 1):
        parts.append(openers[k % len(openers)])
    answer = "<think>" + "\n".join(parts) + "</think>\n"
    answer += "So \\boxed{4}." if boxed else "So 4."
    return {
        "id": f"c{i:03d}",
        "question": f"Solve problem {i}.",
        "answer": answer,
        "ground_truth": "4",
        "annotations": {"script": {
            "criteria": criteria,
            "independent": {str(k): v for k, v in enumerate(independent)},
            "difficulty": [False, False, False, False],
        }},
    }


def write_jsonl(path, rows):
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


def read_jsonl(path):
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


with tempfile.TemporaryDirectory() as tmp:
    p = lambda name: os.path.join(tmp, name)
    good = [True] * 5
    bad = [True, False, True, True, True]
    rows = []
    for i in range(24):
        n = 1 + i % 4
        crit = [bad if (i + k) % 3 == 0 else good for k in range(n)]
        rows.append(record(i, n, crit, [bool((i + k) % 2) for k in range(n - 1)]))
    write_jsonl(p("in.jsonl"), rows)

    chain = [("segment", "in", "seg"), ("judge", "seg", "jud"), ("revise", "jud", "rev"),
             ("score", "rev", "sco")]
    for cmd, src, dst in chain:
        r = run(cmd, "-i", p(src + ".jsonl"), "-o", p(dst + ".jsonl"))
        check(r.returncode == 0, f"{cmd} exits 0")
        summary = json.loads(r.stdout)
        check(summary["records_out"] == 24, f"{cmd} summary counts 24 records")

    r = run("sample", "-i", p("sco.jsonl"), "-o", p("smp.jsonl"), "-d", "8")
    check(r.returncode == 0, "sample exits 0")
    check(len(read_jsonl(p("smp.jsonl"))) == 8, "sample keeps d records")
    with open(p("smp.jsonl.ids.txt")) as f:
        check(len(f.read().split()) == 8, "ids file lists d ids")
    audit = json.load(open(p("smp.jsonl.audit.json")))
    check(len(audit["candidates"]) == 41, "audit lists the 41 sweep steps")

    r = run("sample", "-i", p("smp.jsonl"), "-o", p("again.jsonl"), "-d", "4")
    check(r.returncode == 2, "resampling a sample is refused with exit 2")
    err = json.loads(r.stderr)
    check(err["exit_code"] == 2 and err["error"] == "config", "refusal uses the error envelope")
    r = run("sample", "-i", p("smp.jsonl"), "-o", p("again.jsonl"), "-d", "4", "--force")
    check(r.returncode == 0, "--force allows resampling")

    for fmt_name, probe in [("json", '"kind": "comparison"'), ("markdown", "## Change"),
                            ("csv", "metric,")]:
        r = run("report", "-i", p("sco.jsonl"), "-o", p("rep." + fmt_name), "--format", fmt_name)
        check(r.returncode == 0, f"report --format {fmt_name} exits 0")
        check(probe in open(p("rep." + fmt_name)).read(), f"report {fmt_name} content")

    r = run("score", "-i", p("seg.jsonl"), "-o", p("x.jsonl"))
    check(r.returncode == 3, "scoring unrevised records exits 3")
    check(json.loads(r.stderr).get("missing_stage") == "judge" or
          json.loads(r.stderr).get("missing_stage") == "revise", "missing stage is named")

    r = run("segment", "-i", p("sco.jsonl"), "-o", p("x.jsonl"), "--set", 'markers=["Alternatively"]')
    check(r.returncode == 2, "re-segmenting under a new config without --force exits 2")
    r = run("segment", "-i", p("sco.jsonl"), "-o", p("x.jsonl"), "--set",
            'markers=["Alternatively"]', "--force")
    check(r.returncode == 0, "--force re-segments")
    check(all("judged" not in x["annotations"] for x in read_jsonl(p("x.jsonl"))),
          "forced re-segmentation drops downstream stages")

    with open(p("broken.jsonl"), "w") as f:
        f.write(json.dumps(rows[0]) + "\n{oops\n" + json.dumps(rows[1]) + "\n")
    r = run("segment", "-i", p("broken.jsonl"), "-o", p("x.jsonl"))
    check(r.returncode == 5, "malformed line exits 5 in strict mode")
    r = run("segment", "-i", p("broken.jsonl"), "-o", p("x.jsonl"), "--lenient")
    check(r.returncode == 0 and json.loads(r.stdout)["read_issues"] == 1,
          "--lenient skips and counts the bad line")

    r = run("judge", "-i", p("seg.jsonl"), "-o", p("x.jsonl"),
            "--set", "judge_backend=http", "--set", "judge_endpoint=http://127.0.0.1:1/v1/chat/completions",
            "--set", "judge_model=m", "--set", "judge_retry_attempts=1", "--set", "judge_timeout_s=1")
    check(r.returncode == 4, "unreachable judge exits 4")

    r = run("segment", "-i", p("in.jsonl"), "-o", p("x.jsonl"), "--set", "no_such_key=1")
    check(r.returncode == 2, "unknown config key exits 2")
    r = run("segment", "-i", p("in.jsonl"))
    check(r.returncode == 2, "missing required option exits 2")

    r = run("config", "--set", "sample_size=5")
    check(r.returncode == 0 and len(json.loads(r.stdout)["config_hash"]) == 64,
          "config prints the resolved hash")

    r = run("pipeline", "-i", p("in.jsonl"), "-o", p("out"), "-d", "6",
            "--set", "difficulty_filter=scripted")
    check(r.returncode == 0, "pipeline exits 0")
    check(len(json.loads(r.stdout)) == 8, "pipeline reports eight stages")
    check(len(read_jsonl(p("out/sampled.jsonl"))) == 6, "pipeline samples d records")
    r2 = run("pipeline", "-i", p("in.jsonl"), "-o", p("out2"), "-d", "6",
             "--set", "difficulty_filter=scripted")
    same = all(open(os.path.join(p("out"), f), "rb").read() ==
               open(os.path.join(p("out2"), f), "rb").read() for f in os.listdir(p("out")))
    check(r2.returncode == 0 and same, "pipeline output is byte-identical across runs")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
