"""Smoke test for the synstarts extension module.

    pip install --no-build-isolation -e crates/py
    python python/smoke.py            # builds a small mock corpus with the CLI if available
"""

import json
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

import synstarts

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check(cond, msg):
    if not cond:
        sys.exit(f"smoke FAILED: {msg}")


check(synstarts.TAGS == ["Green", "Yellow", "Red", "Black"], "tags")
check(synstarts.classify({"can_walk": True}) == "Green", "walking")
check(synstarts.classify({"can_walk": False, "respirations": {"rate": 30}, "perfusion": {"radial_pulse_present": True},
                          "mental_status": {"obeys_commands": True}}) == "Yellow", "rate 30 is not over 30")
try:
    synstarts.classify({"can_walk": False})
    check(False, "indeterminate vitals must raise")
except ValueError:
    pass

report = synstarts.validate({
    "triage_tag": "Black",
    "patient_description": "A 60-year-old man lies still and is not breathing, even after his airway is opened.",
    "vitals_info": {"can_walk": False, "respirations": {"initial_breathing": False, "breathing_after_maneuver": False}},
})
check(report["overall"], f"black case should validate: {report}")

parsed = synstarts.parse_response('{"reasoning": "fast breathing", "action": "IMMEDIATE"}')
check(parsed["tag"] == "Red", parsed)
check(synstarts.normalize_action("expectant / deceased") == "EXPECTANT/DECEASED", "action normalisation")
check("Red" in synstarts.generation_prompt("Red"), "generation prompt")

r, p = synstarts.pearson([0.29, 0.64, 0.57, 0.66, 0.57, 0.72], [0.21, 0.86, 0.58, 0.92, 0.85, 0.85])
check(abs(r - 0.92) < 0.01, r)
check(abs(synstarts.wilcoxon([1, 2, 3, 4, 5], [0] * 5)["p_value"] - 0.0625) < 1e-12, "wilcoxon")
check(synstarts.linguistic_features(["a b c", "a b"])["vocabulary_size"] == 3, "vocabulary")

exe = os.environ.get("SYNSTARTS_BIN") or shutil.which("synstarts") or str(ROOT / "target/debug/synstarts")
if pathlib.Path(exe).exists():
    with tempfile.TemporaryDirectory() as tmp:
        out = pathlib.Path(tmp) / "corpus"
        subprocess.run([exe, "--seed", "1", "generate-corpus", "--per-tag", "20", "--out", str(out)],
                       check=True, capture_output=True)
        corpus = synstarts.Corpus(str(out))
        check(len(corpus) == 80, len(corpus))
        manifests = corpus.sample([5, 5, 5, 5], replicates=3, seed=4)
        check(len(manifests) == 3, "manifests")
        run = corpus.evaluate_scripted(manifests[0], responder="constant", constant="MINOR")
        check(run["accuracy"] == 0.25, run["accuracy"])
        run = corpus.evaluate_scripted(manifests[1])
        check(run["accuracy"] == 1.0, run["accuracy"])
        print("corpus round trip:", json.dumps(dict(corpus.tag_counts())))
else:
    print("synstarts binary not found; skipping corpus round trip")

print("smoke OK")
