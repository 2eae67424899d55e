"""Command line: simulate missions, fuse their logs into a map, run the demo.

    posnec simulate --world W --robots 3 --seed 7 --out run1/
    posnec fuse run1/ run2/ --out map/
    posnec demo --out demo/

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then explicit flags.  The effective settings are
written next to the outputs as ``config.txt``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from importlib import resources

from . import fusion, grid as gr, robot as rb, troupe as tr
from .errormodel import ErrorParams, default_params
from .logio import LogFormatError
from .world import WorldParseError, read_world

CONFIG_FILE = "config.txt"
DEMO_SEED = 1

_defaults = default_params()
# key -> (type, default)
SETTINGS = {
    "world": (str, None),
    "robots": (int, 3),
    "seed": (int, None),
    "behaviours": (str, None),
    "dt": (float, tr.DT),
    "resolution": (float, gr.DEFAULT_RESOLUTION),
    "max_error": (float, _defaults.max_error),
    "rate_along": (float, _defaults.rate_along),
    "rate_perp": (float, _defaults.rate_perp),
    "turn_bias_per_45_deg": (float, _defaults.turn_bias_per_45_deg),
    "speed": (float, rb.SPEED),
    "budget": (float, rb.BUDGET),
    "return_fraction": (float, rb.RETURN_FRACTION),
    "standoff": (float, rb.STANDOFF),
    "noise": (bool, True),
    "max_time": (float, 7200.0),
    "launch_interval": (float, 5.0),
    "omni_radius": (float, 1.0),
    "exchange": (bool, True),
    "tau_occ": (float, gr.TAU_OCC),
    "tau_free": (float, gr.TAU_FREE),
}


class CliError(Exception):
    pass


def _convert(key, text):
    kind = SETTINGS[key][0]
    if kind is bool:
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise CliError(f"{key}: expected a boolean, got {text!r}")
    try:
        return kind(text.strip())
    except ValueError:
        raise CliError(f"{key}: expected {kind.__name__}, got {text!r}") from None


def read_config(path) -> dict:
    """Flat ``key = value`` document; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise CliError(f"{path}:{n}: expected 'key = value'")
        if key in SETTINGS:
            out[key] = _convert(key, value)
        elif not key.startswith("world_"):
            raise CliError(f"{path}:{n}: unknown setting {key!r}")
    return out


def effective_settings(args) -> dict:
    cfg = {k: v[1] for k, v in SETTINGS.items()}
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in SETTINGS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def write_settings(directory, cfg: dict, extra: dict | None = None) -> None:
    lines = ["# effective settings"]
    for key in sorted(cfg):
        if cfg[key] is not None:
            lines.append(f"{key} = {cfg[key]!r}" if isinstance(cfg[key], float) else f"{key} = {cfg[key]}")
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value!r}")
    with open(os.path.join(directory, CONFIG_FILE), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _world_bounds(directory):
    path = os.path.join(directory, CONFIG_FILE)
    if not os.path.exists(path):
        return None
    vals = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, sep, value = line.partition("=")
            if sep and key.strip().startswith("world_"):
                vals[key.strip()] = float(value)
    try:
        return vals["world_xmin"], vals["world_ymin"], vals["world_xmax"], vals["world_ymax"]
    except KeyError:
        return None


def read_behaviours(path) -> list:
    """One behaviour per line: ``label p_random_turn p_left_on_obstacle``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise CliError(f"{path}:{n}: expected 'label p_random_turn p_left_on_obstacle'")
            try:
                out.append(rb.BehaviourParams(float(parts[1]), float(parts[2]), parts[0]))
            except ValueError as exc:
                raise CliError(f"{path}:{n}: {exc}") from None
    if not out:
        raise CliError(f"{path}: no behaviours")
    return out


def _params(cfg) -> ErrorParams:
    try:
        return ErrorParams(cfg["rate_along"], cfg["rate_perp"], cfg["turn_bias_per_45_deg"], cfg["max_error"])
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _mission_config(cfg) -> tr.MissionConfig:
    robot = replace(rb.RobotConfig(), speed=cfg["speed"], budget=cfg["budget"],
                    return_fraction=cfg["return_fraction"], standoff=cfg["standoff"], noise=cfg["noise"])
    return tr.MissionConfig(dt=cfg["dt"], robot=robot, omni_radius=cfg["omni_radius"],
                            launch_interval=cfg["launch_interval"], max_time=cfg["max_time"],
                            exchange=cfg["exchange"])


def simulate(cfg: dict, out_dir, stream=None) -> tr.MissionResult:
    stream = stream or sys.stdout
    if cfg["seed"] is None:
        raise CliError("simulate needs --seed (runs are always reproducible)")
    if not cfg["world"]:
        raise CliError("simulate needs --world")
    if cfg["robots"] < 1:
        raise CliError("--robots must be at least 1")
    try:
        world = read_world(cfg["world"])
    except OSError as exc:
        raise CliError(f"cannot read world {cfg['world']}: {exc.strerror}") from None
    except (WorldParseError, ValueError) as exc:
        raise CliError(f"{cfg['world']}: {exc}") from None
    pool = read_behaviours(cfg["behaviours"]) if cfg["behaviours"] else rb.make_troupe_behaviours()
    behaviours = [pool[k % len(pool)] for k in range(cfg["robots"])]
    result = tr.run_mission(world, behaviours, cfg["seed"], _mission_config(cfg), _params(cfg))
    tr.save_mission(result, out_dir)
    b = world.bounds
    write_settings(out_dir, cfg, {"world_xmin": b.xmin, "world_ymin": b.ymin,
                                  "world_xmax": b.xmax, "world_ymax": b.ymax})
    # self-check: what was written reads back as what was delivered
    events, outcomes = tr.load_mission(out_dir)
    if set(events) != set(result.delivered_logs) or outcomes != result.per_robot_outcome:
        raise CliError(f"{out_dir}: mission files do not read back identically")
    for s in result.summaries:
        print(f"{s.robot_id}\t{s.label}\t{s.outcome}\tdistance={s.distance:.2f}m\t"
              f"events={s.events}\tdelivered={s.delivered}", file=stream)
    return result


def fuse(cfg: dict, mission_dirs, out_dir, stream=None) -> gr.PossNecGrid:
    stream = stream or sys.stdout
    params = _params(cfg)
    events, bounds = {}, []
    for d in mission_dirs:
        if not os.path.isdir(d):
            raise CliError(f"{d}: not a mission directory")
        try:
            evs, _ = tr.load_mission(d)
        except LogFormatError as exc:
            raise CliError(f"malformed log: {exc}") from None
        except OSError as exc:
            raise CliError(f"{d}: {exc}") from None
        for k, ev in evs.items():
            events.setdefault(k, ev)
        wb = _world_bounds(d)
        if wb is not None:
            bounds.append(wb)
    res = cfg["resolution"]
    if bounds:
        grid = gr.grid_covering(min(b[0] for b in bounds), min(b[1] for b in bounds),
                                max(b[2] for b in bounds), max(b[3] for b in bounds), res)
    else:
        grid = fusion.grid_for_events(events, res)
    try:
        fusion.ingest(grid, events, params)
    except fusion.FusionError as exc:
        raise CliError(f"malformed log: {exc}") from None
    grid.max_error = params.max_error

    os.makedirs(out_dir, exist_ok=True)
    dump = gr.dumps_grid(grid)
    pgm = fusion.render(grid, cfg["tau_occ"], cfg["tau_free"])
    report = fusion.stats(grid, cfg["tau_occ"], cfg["tau_free"]).to_text(cfg["tau_occ"])
    for name, data in (("map.pngrid", dump.encode()), ("map.pgm", pgm), ("stats.txt", report.encode())):
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(data)
    write_settings(out_dir, cfg)

    # self-check each output against its own parser
    with open(os.path.join(out_dir, "map.pngrid"), encoding="utf-8") as fh:
        back = gr.loads_grid(fh.read())
    if gr.dumps_grid(back) != dump or fusion.render(back, cfg["tau_occ"], cfg["tau_free"]) != pgm:
        raise CliError("grid dump does not round-trip")
    with open(os.path.join(out_dir, "map.pgm"), "rb") as fh:
        if fusion.parse_pgm(fh.read()).shape != (grid.height, grid.width):
            raise CliError("PGM image does not read back")
    with open(os.path.join(out_dir, "stats.txt"), encoding="utf-8") as fh:
        fusion.parse_stats(fh.read())
    st = fusion.stats(grid, cfg["tau_occ"], cfg["tau_free"])
    print(f"fused {len(events)} events from {len(mission_dirs)} mission(s): "
          f"explored {st.explored_fraction:.3f}, occupied {st.occupied_cells}, "
          f"conflict {st.conflict_cells}, strong walls {st.strong_wall_segments(cfg['tau_occ'])}", file=stream)
    return grid


def demo_world_path() -> str:
    return str(resources.files("posnec") / "worlds" / "fig8.txt")


def demo(cfg: dict, out_dir, stream=None) -> gr.PossNecGrid:
    cfg = dict(cfg)
    if cfg["seed"] is None:
        cfg["seed"] = DEMO_SEED
    cfg["world"] = cfg["world"] or demo_world_path()
    mission_dir = os.path.join(out_dir, "mission")
    simulate(cfg, mission_dir, stream)
    return fuse(cfg, [mission_dir], out_dir, stream)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posnec", description="Troupe mapping with possibility/necessity grids.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="FILE", help="key = value settings file")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--out", metavar="DIR", required=True)
        sp.add_argument("--resolution", type=float, metavar="M")
        sp.add_argument("--max-error", dest="max_error", type=float, metavar="M")
        sp.add_argument("--dt", type=float, metavar="S")

    sp = sub.add_parser("simulate", help="run one mission and write its logs")
    common(sp)
    sp.add_argument("--world", metavar="PATH")
    sp.add_argument("--robots", type=int, metavar="N")
    sp.add_argument("--behaviours", metavar="FILE")

    sp = sub.add_parser("fuse", help="build a map from mission directories")
    common(sp)
    sp.add_argument("missions", nargs="*", metavar="MISSION_DIR")

    sp = sub.add_parser("demo", help="three robots on the shipped world, fused and rendered")
    common(sp)
    sp.add_argument("--world", metavar="PATH")
    sp.add_argument("--robots", type=int, metavar="N")
    sp.add_argument("--behaviours", metavar="FILE")
    return p


def cmd_simulate(args, stream=None):
    return simulate(effective_settings(args), args.out, stream)


def cmd_fuse(args, stream=None):
    return fuse(effective_settings(args), args.missions, args.out, stream)


def cmd_demo(args, stream=None):
    return demo(effective_settings(args), args.out, stream)


COMMANDS = {"simulate": cmd_simulate, "fuse": cmd_fuse, "demo": cmd_demo}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (CliError, gr.GridFormatError, OSError) as exc:
        print(f"posnec: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
