"""Synthetic measured-latency matrix: random cities on a sphere, one-way delay
from great-circle distance at fibre speed with a path-inflation factor."""
import math
import random
import sys

n = int(sys.argv[1]) if len(sys.argv) > 1 else 150
rng = random.Random(7)
cities = [(math.asin(rng.uniform(-0.9, 0.9)), rng.uniform(-math.pi, math.pi)) for _ in range(n)]

def km(a, b):
    (p1, l1), (p2, l2) = a, b
    h = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin((l2 - l1) / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(h))

print(f"# nodes={n}")
for a in cities:
    print(",".join("0" if a is b else f"{1.5 * km(a, b) / 200.0:.2f}" for b in cities))
