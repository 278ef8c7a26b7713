#!/usr/bin/env python3
"""Write the synthetic raw CSV fixtures under data/fixtures.

The real regional snapshots are not bundled. These stand-ins keep the raw
schemas and realistic magnitudes and plant the qualitative structure the
analysis looks for: two epidemic shapes (an early sharp northern wave and a
later low one), a few extreme northern curves, a latent severity factor that
drives five of the twelve covariates, and a missing cell for Valle d'Aosta.

Run:  python3 tools/make_synthetic_fixtures.py [--out data/fixtures] [--seed 1]
"""

import argparse
import csv
import datetime as dt
from pathlib import Path

import numpy as np

GRID_START = dt.date(2020, 2, 16)
GRID_DAYS = 75
DPC_START = dt.date(2020, 2, 24)

# region: population, share covered by the all-cause death counts
POPULATION = {
    "Abruzzo": (1_311_580, 0.78),
    "Basilicata": (562_869, 0.70),
    "Calabria": (1_947_131, 0.66),
    "Campania": (5_801_692, 0.72),
    "Emilia Romagna": (4_459_477, 0.91),
    "Friuli Venezia Giulia": (1_215_220, 0.88),
    "Lazio": (5_879_082, 0.80),
    "Liguria": (1_550_640, 0.86),
    "Lombardia": (10_060_574, 0.93),
    "Marche": (1_525_271, 0.84),
    "Molise": (305_617, 0.64),
    "Piemonte": (4_356_406, 0.89),
    "Puglia": (4_029_053, 0.75),
    "Sardegna": (1_639_591, 0.69),
    "Sicilia": (4_999_891, 0.71),
    "Toscana": (3_729_641, 0.87),
    "Trento/Bolzano": (1_072_276, 0.90),
    "Umbria": (882_015, 0.82),
    "Valle d'Aosta": (125_666, 0.95),
    "Veneto": (4_905_854, 0.90),
}

# DPC publishes the two autonomous provinces separately.
PROVINCES = {"Trento/Bolzano": [("P.A. Trento", 0.504), ("P.A. Bolzano", 0.496)]}

# region: (wave, peak deaths per 100k per day, onset offset in days,
#          ISTAT/DPC excess ratio, share of the peak kept after it)
WAVES = {
    "Lombardia": ("north", 4.6, 0, 0.55, 0.4),
    "Valle d'Aosta": ("north", 3.75, 3, 0.55, 0.4),
    "Liguria": ("north", 3.47, 6, 0.62, 0.4),
    "Emilia Romagna": ("north", 2.96, 2, 1.05, 0.03),
    "Trento/Bolzano": ("north", 2.82, 5, 1.00, 0.03),
    "Marche": ("north", 2.05, 3, 1.05, 0.03),
    "Piemonte": ("north", 2.29, 7, 1.00, 0.03),
    "Veneto": ("south", 0.76, 5, 1.00, 0.0),
    "Friuli Venezia Giulia": ("south", 0.84, 8, 1.00, 0.0),
    "Abruzzo": ("south", 0.67, 9, 1.00, 0.0),
    "Toscana": ("south", 0.4, 7, 1.00, 0.0),
    "Puglia": ("south", 0.26, 10, 1.00, 0.0),
    "Umbria": ("south", 0.23, 8, 1.00, 0.0),
    "Lazio": ("south", 0.24, 10, 1.00, 0.0),
    "Molise": ("south", 0.27, 10, 1.00, 0.0),
    "Campania": ("south", 0.24, 10, 1.00, 0.0),
    "Sardegna": ("south", 0.16, 9, 1.00, 0.0),
    "Basilicata": ("south", 0.15, 10, 1.00, 0.0),
    "Sicilia": ("south", 0.12, 10, 1.00, 0.0),
    "Calabria": ("south", 0.1, 10, 1.00, 0.0),
}

COVARIATES = [
    "% Over 65",
    "% Diabetics",
    "% Allergic",
    "Adults per family doctor",
    "ICU beds per 100K inhabitants",
    "Ave. beds per hospital (whole)",
    "Ave. beds per nursing home (ward)",
    "Ave. students per classroom",
    "Ave. employees per firm",
    "Ave. members per household",
    "Public transport rides per capita",
    "PM10",
]

# covariate: (center, spread, loading on the latent severity)
DRIVERS = {
    "Adults per family doctor": (1250.0, 110.0, 0.96),
    "Ave. beds per hospital (whole)": (165.0, 38.0, 0.76),
    "Ave. students per classroom": (20.2, 0.9, 0.78),
    "Ave. employees per firm": (3.8, 0.7, 0.78),
    "Ave. members per household": (2.35, 0.14, -0.78),
}


def wave_shape(kind, u, tail=0.0):
    """Unit-peak epidemic profile, u days after onset. After the peak the
    curve settles towards `tail` instead of zero."""
    u = np.maximum(u - 3.0, 0.0)
    if kind == "north":
        a, k = 24.0, 3.0
    else:
        a, k = 44.0, 2.0
    h = (u / a) ** k * np.exp(k * (1.0 - u / a))
    return np.where(u > a, tail + (1.0 - tail) * h, h)


def days(start, count):
    return [start + dt.timedelta(days=i) for i in range(count)]


def noisy_counts(rng, expected, dispersion):
    """Counts around `expected` with sd = dispersion * sqrt(expected)."""
    sd = dispersion * np.sqrt(np.maximum(expected, 0.0))
    return np.maximum(np.rint(expected + sd * rng.standard_normal(expected.shape)), 0.0)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "fixtures"))
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    regions = sorted(POPULATION)
    grid = days(GRID_START, GRID_DAYS)
    t = np.arange(GRID_DAYS, dtype=float)

    # Excess mortality per 100k per day, before counting noise.
    rate = {}
    for r in regions:
        kind, peak, onset, _, tail = WAVES[r]
        rate[r] = peak * wave_shape(kind, t - onset, tail)

    # population.csv
    write_csv(
        out / "population.csv",
        ["region", "population", "covered_population"],
        [[r, POPULATION[r][0], int(round(POPULATION[r][0] * POPULATION[r][1]))] for r in regions],
    )

    # dpc.csv: cumulative deaths, new cases, new tests from Feb 24.
    dpc_rows = []
    dpc_days = [d for d in grid if d >= DPC_START]
    first = grid.index(DPC_START)
    for r in regions:
        kind, peak, onset = WAVES[r][:3]
        pop = POPULATION[r][0]
        expected = rate[r] * pop / 1e5
        daily = noisy_counts(rng, expected, 0.4)
        # Deaths before the first release are reported on the first day.
        daily[first] += daily[:first].sum()
        cumulative = np.cumsum(daily[first:])
        # Positivity runs about ten days ahead of mortality.
        pos = 0.04 + 0.30 * (peak / 4.3) ** 0.6 * wave_shape(kind, t - onset + 10.0)
        pos = np.clip(pos + 0.01 * rng.standard_normal(GRID_DAYS), 0.005, 0.9)
        tests = np.rint(pop / 1e5 * (8.0 + 60.0 * np.clip((t - 8.0) / 50.0, 0.0, 1.0)) *
                        np.exp(0.15 * rng.standard_normal(GRID_DAYS)))
        cases = np.rint(pos * tests)
        parts = PROVINCES.get(r, [(r, 1.0)])
        for k, d in enumerate(dpc_days):
            tt = first + k
            cum_left = float(cumulative[k])
            cases_left, tests_left = float(cases[tt]), float(tests[tt])
            for j, (label, share) in enumerate(parts):
                last = j == len(parts) - 1
                c = cum_left if last else float(np.floor(cumulative[k] * share))
                nc = cases_left if last else float(np.floor(cases[tt] * share))
                nt = tests_left if last else float(np.floor(tests[tt] * share))
                cum_left -= c
                cases_left -= nc
                tests_left -= nt
                dpc_rows.append([d.isoformat(), label, int(c), int(nc), int(nt)])
    # Reporting irregularities of the kind seen in the real feed.
    for row in dpc_rows:
        if row[1] == "Molise" and row[0] == "2020-03-20":
            row[3] = -1
        if row[1] == "Basilicata" and row[0] == "2020-03-12":
            row[3] = row[4] + 7
        if row[1] == "Umbria" and row[0] == "2020-04-02":
            row[2] -= 1  # a corrected cumulative count
    write_csv(out / "dpc.csv", ["date", "region", "cumulative_deaths", "new_cases", "new_tests"], dpc_rows)

    # istat.csv: all-cause deaths on the covered population, 2015-2020.
    istat_rows = []
    for r in regions:
        kind, peak, onset, ratio = WAVES[r][:4]
        covered = POPULATION[r][0] * POPULATION[r][1]
        # Late-winter baseline, slowly declining into spring.
        base = covered / 1e5 * (3.1 - 0.006 * t)
        years = [noisy_counts(rng, base * (1.0 + 0.02 * rng.standard_normal()), 0.3) for _ in range(5)]
        y2020 = noisy_counts(rng, base + ratio * rate[r] * covered / 1e5, 0.3)
        for k, d in enumerate(grid):
            row = [d.isoformat(), r]
            leap = d.month == 2 and d.day == 29
            row += ["" if leap else int(y[k]) for y in years]
            row.append(int(y2020[k]))
            istat_rows.append(row)
    write_csv(out / "istat.csv", ["date", "region"] + [f"deaths_{y}" for y in range(2015, 2021)], istat_rows)

    # mobility.csv: grocery & pharmacy change from the pre-epidemic baseline.
    mob_rows = []
    lockdown = grid.index(dt.date(2020, 3, 9))
    easter = [grid.index(dt.date(2020, 4, 12)), grid.index(dt.date(2020, 4, 13))]
    for r in regions:
        kind, peak, onset = WAVES[r][:3]
        depth = 0.22 + 0.05 * np.log1p(peak) + 0.03 * rng.standard_normal()
        ramp = np.clip((t - lockdown + onset * 0.2) / 7.0, 0.0, 1.0)
        weekday = np.array([0.04 if d.weekday() == 5 else (-0.12 if d.weekday() == 6 else 0.0) for d in grid])
        m = 0.03 - ramp * depth + weekday * ramp + 0.02 * rng.standard_normal(GRID_DAYS)
        m[easter] -= 0.35
        mob_rows += [[d.isoformat(), r, f"{m[k]:.3f}"] for k, d in enumerate(grid)]
    write_csv(out / "mobility.csv", ["date", "region", "grocery_pharmacy_change"], mob_rows)

    # covariates.csv: five covariates follow the latent severity.
    severity = np.array([np.log(WAVES[r][1]) for r in regions])
    severity = (severity - severity.mean()) / severity.std(ddof=1)
    n = len(regions)

    def innovation():
        # Noise made exactly uncorrelated with the severity in the sample.
        e = rng.standard_normal(n)
        e -= e.mean()
        e -= (e @ severity) / (severity @ severity) * severity
        return e / e.std(ddof=1)

    values = {}
    for name, (center, spread, load) in DRIVERS.items():
        values[name] = center + spread * (load * severity + np.sqrt(1.0 - load**2) * innovation())
    shared = innovation()
    values["% Over 65"] = 23.0 + 2.0 * innovation()
    values["% Diabetics"] = 6.0 + 1.0 * (0.95 * shared + 0.31 * innovation())
    values["% Allergic"] = 11.0 + 1.6 * (0.95 * shared + 0.31 * innovation())
    values["ICU beds per 100K inhabitants"] = 8.6 + 1.5 * innovation()
    values["Ave. beds per nursing home (ward)"] = 52.0 + 14.0 * innovation()
    values["Public transport rides per capita"] = np.exp(4.8 + 0.7 * innovation())
    values["PM10"] = 25.0 + 5.5 * innovation()

    decimals = {"Adults per family doctor": 0, "Public transport rides per capita": 1}
    cov_rows = []
    for i, r in enumerate(regions):
        row = [r]
        for name in COVARIATES:
            if r == "Valle d'Aosta" and name == "Ave. employees per firm":
                row.append("")
            else:
                row.append(f"{values[name][i]:.{decimals.get(name, 2)}f}")
        cov_rows.append(row)
    write_csv(out / "covariates.csv", ["region"] + COVARIATES, cov_rows)


if __name__ == "__main__":
    main()
