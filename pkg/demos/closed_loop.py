"""Run the whole pipeline from demos/walk.toml and report tracking quality."""
from pathlib import Path

from romwalk.pipeline import load_config, run

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    cfg = load_config(HERE / "walk.toml")
    out = HERE.parent / cfg.out
    man = run(cfg, out)
    sim = man.stages.get("simulate", {})
    print(f"status {man.status}; {len(man.files)} files in {out}")
    if sim.get("status") == "ok":
        print(f"max COM error {100 * sim['max_com_error']:.2f} cm over {sim['steps']} control steps")
        print(f"worst force-band excess {sim['band_violation']:.2e} N")
