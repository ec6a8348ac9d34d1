"""Export M1/M3 subsets from the `fcompdata` wheel as Monash-style .tsf files.

Usage: python3 scripts/export_m_competitions.py <fcompdata wheel> <out dir>

The wheel can be fetched with `pip download --no-deps fcompdata==0.1.4`.
Each series is the concatenation of the competition's in-sample (`x`) and
out-of-sample (`xx`) parts, which is how the Monash repository stores them.
Original start dates are not carried by the source, so every series starts
at 1900-01-01; only the spacing matters downstream.
"""

import json
import sys
import zipfile

SUBSETS = [
    ("m3_data.json", "YEARLY", "m3_yearly_dataset.tsf", "yearly", 6),
    ("m3_data.json", "QUARTERLY", "m3_quarterly_dataset.tsf", "quarterly", 8),
    ("m3_data.json", "MONTHLY", "m3_monthly_dataset.tsf", "monthly", 18),
    ("m1_data.json", "YEARLY", "m1_yearly_dataset.tsf", "yearly", 6),
]


def fmt(v):
    return repr(float(v)).rstrip("0").rstrip(".") if "." in repr(float(v)) else repr(v)


def main(wheel, out_dir):
    z = zipfile.ZipFile(wheel)
    for source, period, name, freq, horizon in SUBSETS:
        data = json.loads(z.read("fcompdata/data/" + source))
        lines = [
            "@relation " + name.replace("_dataset.tsf", ""),
            "@attribute series_name string",
            "@attribute start_timestamp date",
            "@frequency " + freq,
            "@horizon " + str(horizon),
            "@missing false",
            "@equallength false",
            "@data",
        ]
        for key, rec in data.items():
            if rec["period"][0] != period:
                continue
            values = rec["x"] + rec["xx"]
            lines.append(
                "%s:1900-01-01 00-00-00:%s" % (key, ",".join(fmt(v) for v in values))
            )
        with open("%s/%s" % (out_dir, name), "w") as f:
            f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
