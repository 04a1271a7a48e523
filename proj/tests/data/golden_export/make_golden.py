# Regenerates the 10-row golden export with plain struct packing.
import random
import struct
from pathlib import Path

here = Path(__file__).parent
rng = random.Random(10)
rows = [
    ("g0", "book_flight", "train"), ("g1", "book_flight", "val"), ("g2", "book_flight", "test"),
    ("g3", "weather", "train"), ("g4", "weather", "val"), ("g5", "weather", "test"),
    ("g6", "alarm", "train"), ("g7", "alarm", "test"), ("g8", "oos", "test"), ("g9", "oos", "val"),
]


def write(name, dim):
    with open(here / name, "wb") as f:
        f.write(b"DETB" + struct.pack("<IIQ", 1, dim, len(rows)))
        for _ in rows:
            f.write(struct.pack("<%df" % dim, *(rng.gauss(0.0, 0.3) for _ in range(dim))))


write("golden.tsdae.detb", 768)
write("golden.use.detb", 512)
lines = ["#deter-manifest\t1", "#tsdae_file\tgolden.tsdae.detb", "#use_file\tgolden.use.detb",
         "#tsdae_dim\t768", "#use_dim\t512", "id\tintent\tsplit\trow"]
lines += ["%s\t%s\t%s\t%d" % (i, intent, split, n) for n, (i, intent, split) in enumerate(rows)]
(here / "golden.tsv").write_text("\n".join(lines) + "\n")
