# %% [markdown]
# # Command line walkthrough
#
# Writes a small tab-separated dataset to a temporary directory and drives
# the `boxquery` command through ingest, training, querying and evaluation.

# %%
import subprocess
import sys
import tempfile
from pathlib import Path

from boxquery.synthetic import venn_world

work = Path(tempfile.mkdtemp(prefix="boxquery-demo-"))
world = venn_world(m=200, n=8, drop=0.3, side=(0.2, 0.9), seed=2)
cat = world.catalog


def dump(matrix, path):
    rows, cols, _ = matrix.pairs()
    path.write_text("".join(f"{cat.items[i]}\t{cat.attributes[a]}\n" for i, a in zip(rows, cols)))


dump(world.observed, work / "tags.tsv")
dump(world.truth, work / "truth.tsv")
(work / "vec.conf").write_text("epochs=200\nloss_kind=crossEntropy\ndims=16\nbatch_size=32\nneg_items=1\nneg_attrs=1\n")


def boxquery(*args):
    print("$ boxquery", " ".join(map(str, args)))
    out = subprocess.run([sys.executable, "-m", "boxquery", *map(str, args)], capture_output=True, text=True)
    print(out.stdout + out.stderr)
    return out.returncode


# %%
boxquery("ingest", "--noisy", work / "tags.tsv", "--truth", work / "truth.tsv", "--out", work / "ds")
boxquery("train", "--data", work / "ds/noisy.npz", "--catalog", work / "ds/catalog.json",
         "--config", work / "vec.conf", "--out", work / "vec.ckpt")

# %%
first, second = cat.attributes[:2]
boxquery("query", f"{first} & !{second}", "--checkpoint", work / "vec.ckpt", "--catalog", work / "ds/catalog.json",
         "-k", 5, "--strategy", "probabilistic")

# %%
boxquery("genbench", "--truth", work / "ds/truth.npz", "--catalog", work / "ds/catalog.json",
         "--out", work / "bench.jsonl", "--lift-min", 1.0)
boxquery("eval", "--bench", work / "bench.jsonl", "--catalog", work / "ds/catalog.json",
         "--noisy", work / "ds/noisy.npz", "--checkpoint", f"vec={work / 'vec.ckpt'}", "-k", 1, "-k", 10)
boxquery("completeness", "--truth", work / "ds/truth.npz", "--noisy", work / "ds/noisy.npz",
         "--catalog", work / "ds/catalog.json")
