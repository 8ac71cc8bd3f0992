"""Regenerates the small synthetic movie corpus used by tests and the README walkthrough."""
import random

rng = random.Random(4)
adjectives = ["Silent", "Crimson", "Hidden", "Broken", "Golden", "Last", "Frozen", "Wild",
              "Electric", "Midnight", "Lonely", "Burning", "Secret", "Distant", "Iron"]
nouns = ["Harbor", "Empire", "Garden", "Signal", "Horizon", "River", "Kingdom", "Echo",
         "Mirror", "Voyage", "Station", "Orchard", "Frontier", "Lantern", "Canyon"]
titles = set()
while len(titles) < 60:
    a, n = rng.choice(adjectives), rng.choice(nouns)
    year = rng.randint(1970, 2019)
    form = rng.random()
    if form < 0.4:
        t = f"The {a} {n} ({year})"
    elif form < 0.7:
        t = f"{a} {n} ({year})"
    else:
        t = f"{n} of the {a} ({year})"
    titles.add(t)
titles = sorted(titles)
items = [f"m{i:03d}" for i in range(len(titles))]
with open("catalog.tsv", "w") as f:
    f.write("# item_id\ttitle\tdomain\n")
    for i, t in zip(items, titles):
        f.write(f"{i}\t{t}\tmovies\n")

weights = [1.0 / (r + 1) ** 0.9 for r in range(len(items))]
pop_order = items[:]
rng.shuffle(pop_order)
succ = {i: rng.sample(items, 3) for i in items}
rows = []
t = 1_000_000
for u in range(80):
    n = rng.randint(5, 40)
    cur = rng.choices(pop_order, weights)[0]
    start = rng.randint(0, 400_000)
    ts = t + start
    for _ in range(n):
        rows.append((f"u{u:03d}", cur, ts))
        ts += rng.randint(60, 20_000)
        cur = rng.choice(succ[cur]) if rng.random() < 0.5 else rng.choices(pop_order, weights)[0]
rng.shuffle(rows)
with open("interactions.tsv", "w") as f:
    f.write("# user_id\titem_id\ttimestamp\n")
    for u, i, ts in rows:
        f.write(f"{u}\t{i}\t{ts}\n")
