"""Seeded stand-in for the New York retrofit table.

Same 26 columns as the real file, with the quirks the default cleaning
rules expect: a lowercase "Natural gas" variant, a stray "1347" electric
utility, empty program-financing cells and full dates. Targets mix linear
terms with threshold (tree-shaped) effects plus noise.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import NY_COLUMNS
from .rng import make_rng

COUNTIES = ["Suffolk", "Nassau", "Westchester", "Erie", "Monroe", "Onondaga", "Albany", "Dutchess",
            "Orange", "Ulster", "Saratoga", "Oneida", "Broome", "Jefferson"]
CITIES = ["Buffalo", "Rochester", "Syracuse", "Albany", "Yonkers", "Huntington", "Babylon", "Ithaca",
          "Kingston", "Poughkeepsie", "Utica", "Binghamton", "Watertown", "Troy", "Schenectady",
          "Hempstead", "Islip", "Newburgh"]
GAS = ["National Grid", "Con Edison", "NYSEG", "Rochester Gas & Electric", "Central Hudson",
       "National Fuel Gas", "St. Lawrence Gas", "KeySpan"]
ELECTRIC = ["National Grid", "Con Edison", "NYSEG", "Long Island Power Authority", "Central Hudson",
            "Rochester Gas & Electric"]
FUELS = ["Natural Gas", "Oil", "Electricity", "Propane", "Wood", "Kerosene", "Coal", "Pellets"]
FINANCING = ["Smart Energy Loan", "On-Bill Recovery Financing", "Green Jobs-Green NY Loan"]
MEASURES = ["Building Shell", "Heating/Cooling/Ventilation", "Water Heater"]


def _zipf(rng: np.random.Generator, k: int, n: int, a: float = 1.1) -> np.ndarray:
    p = 1.0 / np.arange(1, k + 1) ** a
    return rng.choice(k, size=n, p=p / p.sum())


def _date(rng: np.random.Generator, years: np.ndarray) -> list[str]:
    months = rng.integers(1, 13, size=years.size)
    days = rng.integers(1, 29, size=years.size)
    return [f"{m:02d}/{d:02d}/{y}" for m, d, y in zip(months, days, years)]


def generate_rows(n: int = 500, seed: int = 20240101) -> list[dict]:
    rng = make_rng(seed, "synthetic")
    county = _zipf(rng, len(COUNTIES), n)
    city = _zipf(rng, len(CITIES), n)
    gas = _zipf(rng, len(GAS), n)
    elec = _zipf(rng, len(ELECTRIC), n)
    fuel = rng.choice(len(FUELS), size=n, p=[0.45, 0.25, 0.1, 0.1, 0.04, 0.03, 0.02, 0.01])
    assisted = rng.random(n) < 0.3
    home_perf = rng.random(n) < 0.9
    audit = rng.random(n) < 0.4
    completion_year = rng.integers(2010, 2021, size=n)
    year_built = rng.integers(1900, 2011, size=n)
    size = np.round(rng.lognormal(np.log(1800), 0.35, size=n)).astype(int)
    volume = np.round(size * 8.5 * rng.uniform(0.9, 1.1, size=n)).astype(int)
    units = rng.choice([1, 2, 3, 4], size=n, p=[0.95, 0.03, 0.015, 0.005])
    measure = rng.choice(len(MEASURES), size=n, p=[0.975, 0.02, 0.005])
    cost = np.round(rng.lognormal(np.log(9000), 0.5, size=n)).astype(int)
    incentive_rate = np.where(assisted, 0.30, 0.06) * rng.uniform(0.8, 1.2, size=n)
    incentives = np.round(cost * incentive_rate).astype(int)
    financed = rng.random(n) < 0.45
    financing = rng.integers(len(FINANCING), size=n)
    loan = np.where(financed, np.round(cost * rng.uniform(0.5, 0.9, size=n)), 0).astype(int)

    is_elec = FUELS.index("Electricity") == fuel
    is_oilish = np.isin(fuel, [FUELS.index("Oil"), FUELS.index("Propane")])
    old = year_built < 1980
    lipa = ELECTRIC.index("Long Island Power Authority") == elec
    mmbtu = (
        4.0
        + 0.0018 * cost
        + 14.0 * is_oilish
        - 22.0 * is_elec
        + 5.0 * old
        + 0.004 * (size - 1800) * (size > 2200)
        + 3.0 * assisted
        + rng.normal(0, 4.0, size=n)
    )
    kwh = (
        250.0
        + 3800.0 * is_elec
        + 0.015 * cost
        - 600.0 * (lipa & ~is_elec)
        + 300.0 * financed
        + rng.normal(0, 220.0, size=n)
    )
    dollars = 19.0 * mmbtu + 0.16 * kwh + 80.0 * (units > 2) + 120.0 * old + rng.normal(0, 90.0, size=n)

    lowercase_gas = rng.random(n) < 0.15
    anomaly_row = int(rng.integers(n))
    rows = []
    for i in range(n):
        fuel_name = FUELS[fuel[i]]
        if fuel_name == "Natural Gas" and lowercase_gas[i]:
            fuel_name = "Natural gas"
        row = {
            "Reporting Period": f"06/30/{int(rng.integers(2019, 2023))}",
            "Home Performance Project ID": f"P{100000 + i}",
            "Home Performance Site ID": f"S{300000 + int(rng.integers(0, 10 * n))}",
            "Project County": COUNTIES[county[i]],
            "Project City": CITIES[city[i]],
            "Project Zip": str(int(rng.integers(10001, 14926))),
            "Gas Utility": GAS[gas[i]],
            "Electric Utility": "1347" if i == anomaly_row else ELECTRIC[elec[i]],
            "Project Completion Date": _date(rng, completion_year[i : i + 1])[0],
            "Customer Type": "Assisted" if assisted[i] else "Market",
            "Low-Rise or Home Performance Indicator": "Home Performance" if home_perf[i] else "Low-Rise",
            "Total Project Cost": int(cost[i]),
            "Total Incentives": int(incentives[i]),
            "Type of Program Financing": FINANCING[financing[i]] if financed[i] else "",
            "Amount Financed Through Program": int(loan[i]),
            "Pre-Retrofit Home Heating Fuel Type": fuel_name,
            "Year Home Built": int(year_built[i]),
            "Size of Home": int(size[i]),
            "Volume of Home": int(volume[i]),
            "Number of Units": int(units[i]),
            "Measure Type": MEASURES[measure[i]],
            "Estimated Annual kWh Savings": int(round(kwh[i])),
            "Estimated Annual MMBtu Savings": int(round(mmbtu[i])),
            "First Year Energy Savings $ Estimate": int(round(dollars[i])),
            "Homeowner Received Green Jobs-Green NY Free/Reduced Cost Audit (Y/N)": "Y" if audit[i] else "N",
            "Location": f"({40.5 + rng.random() * 4:.4f}, {-79.5 + rng.random() * 7:.4f})",
        }
        rows.append(row)
    return rows


def write_synthetic_csv(path: str | Path, n: int = 500, seed: int = 20240101) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(NY_COLUMNS), lineterminator="\n")
        w.writeheader()
        w.writerows(generate_rows(n, seed))
    return path


def bundled_dir() -> Path:
    return Path(__file__).resolve().parent / "data"
