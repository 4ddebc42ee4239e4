import csv
from typing import Iterable, Sequence, TextIO

from dob_toolkit.services.analysis import BodeGrid, RootLocusResult
from dob_toolkit.services.timesim import SimTrace

BODE_HEADER = ("omega_rad_s", "mag_db", "phase_deg")
LOCUS_HEADER = ("gain", "branch", "re", "im", "stable")
SIM_HEADER = (
    "t", "q_ref", "q_m", "qdot_m", "qdot_meas", "i_m",
    "tau_dis_hat", "tau_load_true", "tau_load_hat", "tau_ref",
)


def fmt(value: float) -> str:
    """9 significant digits, '.' decimal separator."""
    return format(float(value), ".9g")


def _write(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[str]]) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    count = 0
    for row in rows:
        writer.writerow(row)
        count += 1
    return count


def write_bode_csv(stream: TextIO, grid: BodeGrid) -> int:
    rows = ((fmt(w), fmt(m), fmt(p)) for w, m, p in grid.rows())
    return _write(stream, BODE_HEADER, rows)


def write_locus_csv(stream: TextIO, result: RootLocusResult) -> int:
    rows = (
        (fmt(gain), str(branch), fmt(pole.real), fmt(pole.imag), "1" if stable else "0")
        for gain, branch, pole, stable in result.rows()
    )
    return _write(stream, LOCUS_HEADER, rows)


def write_trace_csv(stream: TextIO, trace: SimTrace) -> int:
    columns = [trace.column(name).tolist() for name in SIM_HEADER]
    rows = ([fmt(v) for v in values] for values in zip(*columns))
    return _write(stream, SIM_HEADER, rows)
