"""Bundled example models, relay nets and simulation scenarios."""

from importlib import resources

VERIFIED = ("blinker", "counter_sat", "shift_register", "sum_window", "traffic_light",
            "route_interlock", "divider")
SEEDED_BUGS = ("bug_counter_wrap", "bug_div_zero", "bug_index", "bug_loop_sum",
               "bug_invariant", "bug_wide_diff")
RELAY_NETS = ("lamp", "motor_starter", "route_relays", "level_crossing", "signal_aspect")
SCENARIOS = ("blinker_nominal", "blinker_bitflip", "blinker_halt", "blinker_freeze",
             "blinker_stuck", "blinker_program", "blinker_drop")


def path(filename: str):
    return resources.files(__name__).joinpath(filename)


def read(filename: str) -> str:
    return path(filename).read_text(encoding="utf-8")


def model_source(name: str) -> str:
    return read(f"{name}.b0")


def relay_source(name: str) -> str:
    return read(f"{name}.relay")


def scenario_text(name: str) -> str:
    return read(f"{name}.json")
