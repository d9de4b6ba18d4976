"""Smoke test for the c2s extension module."""

import math
import tempfile

import c2s

cfg = c2s.Config('combo = "H+H"\neval.episodes = 2\n', [("eval.seeds", "[5]")])
print(cfg)
assert c2s.COMBOS == ["H+H", "L+H", "H+L", "L+L", "P+L"]

m = c2s.run_episode(cfg, seed=3)
assert m["served"] + m["dropped"] <= m["generated"]
assert m == c2s.run_episode(cfg, seed=3), "episodes must be reproducible"
print("episode", {k: m[k] for k in ("trips", "served", "utilization")})

records = c2s.evaluate(cfg)
assert len(records) == 2

assert c2s.reward(0.0, 0.0, 0.0, 0.0) == 0.0
assert c2s.reward(-0.5, -0.5, 1.0, -0.25) > c2s.reward(-0.5, -0.5, 0.0, -0.25)
assert c2s.similarity([0.3, 0.1], [0.3, 0.1], 2.0) == 1.0
assert 0.0 <= c2s.similarity([0.0, 0.0], [1.0, 1.0], math.sqrt(2.0)) <= 1.0

for exact, heuristic in c2s.oracle_compare(cfg, instances=20, max_orders=5):
    if exact is not None and heuristic is not None:
        assert exact <= heuristic + 1e-9

train_cfg = c2s.Config(
    'combo = "H+L"\nepisodes = 2\nseeds = [0]\neval.episodes = 1\n'
)
runs = c2s.train(train_cfg)
(seed, curve, agents), = runs
assert seed == 0 and len(curve) == 2 and agents.combo == "H+L"
with tempfile.TemporaryDirectory() as d:
    agents.save(d)
    back = c2s.Agents.load(d, "H+L", train_cfg)
    assert c2s.evaluate(train_cfg, back) == c2s.evaluate(train_cfg, agents)

try:
    c2s.Config("env.capacity = 0")
except ValueError as e:
    print("rejected:", e)
else:
    raise AssertionError("bad config accepted")

print("smoke test ok")
