"""CSV tables, SVG line plots and run manifests."""
import csv
import datetime as _dt
import io
import math
import os
import tempfile


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def atomic_write(path, data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_csv(path, header, rows):
    """Dict rows as RFC 4180 CSV: header row, CRLF line ends, floats in round-trip repr."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[h]) for h in header])
    atomic_write(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


_PALETTE = ("#d62728", "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b")
_DASH = {"centrifuge": "6,4", "centrifuge_sd": "6,4"}
_WIDTH = {"spring_sd": 3, "centrifuge_sd": 3}


def svg_line_plot(series, xlabel, ylabel, title="", width=560, height=380):
    """Mean +- SD line plot; ``series`` maps a name to ``[(x, mean, sd), ...]``."""
    left, right, top, bottom = 60, 150, 30, 50
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [v for pts in series.values() for _, m, s in pts if not math.isnan(m) for v in (m - s, m + s)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    y0, y1 = (min(ys + [0.5]), max(ys + [1.0])) if ys else (0.0, 1.0)
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {top + ph / 2:.1f})">{ylabel}</text>',
        f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle">{title}</text>',
    ]
    for i in range(5):
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.2f}</text>')
    for xv in sorted(set(xs)):
        out.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 16}" text-anchor="middle">{xv:g}</text>')
    for i, (name, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = sorted(p for p in pts if not math.isnan(p[1]))
        if not pts:
            continue
        path = " ".join(f"{sx(x):.2f},{sy(m):.2f}" for x, m, _ in pts)
        dash = f' stroke-dasharray="{_DASH[name]}"' if name in _DASH else ""
        if name == "baseline":
            dash = ' stroke-dasharray="2,3"'
        out.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="{_WIDTH.get(name, 1.5)}"{dash}/>'
        )
        for x, m, s in pts:
            out.append(
                f'<line x1="{sx(x):.2f}" y1="{sy(m - s):.2f}" x2="{sx(x):.2f}" y2="{sy(m + s):.2f}" stroke="{color}"/>'
            )
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{width - right + 10}" y1="{ly}" x2="{width - right + 35}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{width - right + 40}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path, command, config, version, started, finished, outputs):
    """Plain ``key=value`` manifest; the config keys can be fed back through ``--config``."""
    lines = [f"command={command}", f"version={version}", f"started={started}", f"finished={finished}"]
    lines += [f"{k}={_fmt(v)}" for k, v in config.items()]
    lines += [f"output={os.path.basename(p)}" for p in outputs]
    atomic_write(path, "\n".join(lines) + "\n")


def read_config(path):
    """Flat ``key=value`` file; blank lines and ``#`` comments ignored, repeated keys keep the last value."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: malformed line {raw!r}")
            out[key.strip()] = value.strip()
    return out
