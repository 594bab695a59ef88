"""
Generating synthetic combined-sewer data
========================================

The harness ships a generator that mimics the shape of sewer telemetry:
rain events drive the filling level of an overflow basin, auxiliary
sensors (pump energy, valve state) follow the level, and a noisy copy of
the rain series plays the role of an external rain forecast.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from sewerbench import SynthConfig, generate, load_dataset, write_csv, write_schema

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# One month of hourly data. Everything is deterministic in the seed.
cfg = SynthConfig(length=24 * 30, seed=7, rain_event_rate=2.0)
frame = generate(cfg)

print(f"{frame.length} hourly rows, channels:")
for spec in frame.channels:
    print(f"  {spec.name:<14} role={spec.role:<17} unit={spec.unit}")

# The level saturates at the basin capacity during heavy rain; that clamp
# is what makes peak events interesting for forecasting.
level = frame.column("level")
rain = frame.column("rain")
print(f"level range: {level.min():.1f} .. {level.max():.1f} (capacity {cfg.basin_capacity})")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 5), sharex=True)
ax1.plot(rain, lw=0.8)
ax1.set_ylabel("rain [mm/h]")
ax2.plot(level, lw=0.8, color="tab:orange")
ax2.axhline(cfg.basin_capacity, ls="--", color="gray", lw=0.8)
ax2.set_ylabel("basin level [cm]")
ax2.set_xlabel("hour")
fig.tight_layout()
fig.savefig(out_dir / "synthetic_data.svg")
print(f"wrote {out_dir / 'synthetic_data.svg'}")

# Datasets persist as a CSV plus a sidecar schema mapping channels to
# roles; empty fields mean missing. The round trip is byte-exact.
csv_path = out_dir / "sewer.csv"
write_csv(frame, csv_path)
write_schema(frame, out_dir / "sewer.schema.yaml")
reloaded = load_dataset(csv_path)
assert reloaded.target_name == "level"
print(f"wrote and reloaded {csv_path} (target: {reloaded.target_name})")
