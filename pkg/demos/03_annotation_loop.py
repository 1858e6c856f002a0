"""The active-learning annotation loop, driven in process.

Creates an annotation session over a synthetic pool, labels sentences with
their gold labels, and shows the cold start (no suggestions), the retrain
that fires on the 10th commit, and the suggestions that appear afterwards.
The export at the end round-trips through the corpus loader.

Run:  python3 demos/03_annotation_loop.py
"""

import tempfile
from pathlib import Path

from oed.corpus import load_dataset
from oed.service import AnnotationSession
from oed.synth import random_fixture

pool = random_fixture(15, seed=21)
gold = {s.id: s.labels for s in pool}
session = AnnotationSession("demo", pool, retrain_batch=10,
                            async_retrain=False)

for i in range(1, 13):
    task = session.next_task()
    suggested = task.get("suggestions")
    shown = ("suggestions " + " ".join(f"{p:.1f}" for p in suggested)
             if suggested is not None else "no suggestions (cold start)")
    outcome = session.submit(task["task_token"], gold[task["sentence_id"]])
    print(f"commit {i:>2}: {task['sentence_id']:<5} {shown:<40} "
          f"-> {outcome['status']}")

status = session.status()
print(f"\nlabeled {status['labeled_count']} sentences, "
      f"{status['retrain_count']} retrain(s), "
      f"{status['since_last_retrain']} commits toward the next")

export_path = Path(tempfile.mkdtemp(prefix="oed-demo-")) / "export.jsonl"
export_path.write_text(session.export())
reloaded = load_dataset(export_path)
print(f"export round-trips: {len(reloaded)} sentences re-load cleanly "
      f"from {export_path}")
