"""Enumerate monthly trigger dates for 2012-2017 from the bundled holiday list.

Writes calendar_2012_2017.csv next to this script. Uses only the standard
library so it shares no code with the Rust calendar.
"""

import csv
import datetime as dt
import pathlib

HERE = pathlib.Path(__file__).resolve().parent
HOLIDAYS = HERE.parents[1] / "data" / "us_market_holidays_2010_2018.txt"


def load_holidays():
    out = set()
    for line in HOLIDAYS.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.add(dt.date.fromisoformat(line))
    return out


def open_day(d, holidays):
    return d.weekday() < 5 and d not in holidays


def roll(d, holidays):
    month = d.month
    while d.month == month:
        if open_day(d, holidays):
            return d
        d += dt.timedelta(days=1)
    return None


def main():
    holidays = load_holidays()
    rows = []
    for year in range(2012, 2018):
        for month in range(1, 13):
            first = dt.date(year, month, 1)
            fridays = [first + dt.timedelta(days=i) for i in range(31)]
            fridays = [d for d in fridays if d.month == month and d.weekday() == 4]
            rows.append((f"{year}-{month:02d}", roll(fridays[2], holidays), roll(first, holidays)))
    with open(HERE / "calendar_2012_2017.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["month", "third_friday", "first_trading_day"])
        for m, tf, ftd in rows:
            w.writerow([m, tf.isoformat(), ftd.isoformat()])


if __name__ == "__main__":
    main()
