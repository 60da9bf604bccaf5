"""Parameter and multiply accounting per layer.

Conventions: biases are not parameters; a multiply is one scalar weight
multiplication (bias adds, activations, pooling and softmax are free);
conv multiplies are counted on the conv grid before pooling.
"""
import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .zoo import ArchSpec, LayerSpec, layer_output_shape


@dataclass(frozen=True)
class LayerFootprint:
    layer_index: int
    kind: str
    params: int
    multiplies: int
    output_shape: tuple


@dataclass(frozen=True)
class FootprintReport:
    name: str
    layers: tuple

    @property
    def total_params(self):
        return sum(l.params for l in self.layers)

    @property
    def total_multiplies(self):
        return sum(l.multiplies for l in self.layers)


def layer_footprint(layer: LayerSpec, in_shape, layer_index=0):
    out_shape = layer_output_shape(layer, in_shape)
    if layer.kind == "conv":
        t, f, c_in = in_shape
        s, v = layer.stride
        positions = ((t - layer.m) // s + 1) * ((f - layer.r) // v + 1)
        params = layer.m * layer.r * c_in * layer.n
        mults = params * positions
    else:
        in_dim = 1
        for d in in_shape:
            in_dim *= d
        params = mults = in_dim * layer.n
    return LayerFootprint(layer_index, layer.kind, params, mults, out_shape)


def model_footprint(spec: ArchSpec):
    spec.validate()
    rows, shape = [], spec.input_shape
    for i, layer in enumerate(spec.layers):
        row = layer_footprint(layer, shape, i)
        rows.append(row)
        shape = row.output_shape
    return FootprintReport(spec.name, tuple(rows))


def format_count(value):
    """3 significant figures with K/M/G suffix, rounding half up: 10240 -> '10.2K'."""
    if value < 1000:
        return str(value)
    for suffix, scale in (("K", 10**3), ("M", 10**6), ("G", 10**9)):
        scaled = Decimal(value) / scale
        digits = len(str(int(scaled)))
        rounded = scaled.quantize(Decimal(1).scaleb(digits - 3), rounding=ROUND_HALF_UP)
        if rounded >= 1000 and suffix != "G":
            continue
        if len(str(int(rounded))) > digits:
            # 99.96 -> 100.0: drop the extra digit
            rounded = rounded.quantize(Decimal(1).scaleb(digits - 2), rounding=ROUND_HALF_UP)
        return f"{rounded}{suffix}"


def _cell(value):
    return "-" if value is None else str(value)


def render_table(spec: ArchSpec, report: FootprintReport | None = None):
    """Text table: type, m, r, n, p, q, s, v, Par., Mult. plus a Total row."""
    report = report or model_footprint(spec)
    header = ["type", "m", "r", "n", "p", "q", "s", "v", "Par.", "Mult."]
    rows = []
    for layer, fp in zip(spec.layers, report.layers):
        n = "n_labels" if layer.kind == "softmax" else layer.n
        if layer.kind == "conv":
            geo = [layer.m, layer.r, n, *layer.pool, *layer.stride]
        else:
            geo = [None, None, n, None, None, None, None]
        rows.append([layer.kind, *map(_cell, geo),
                     format_count(fp.params), format_count(fp.multiplies)])
    rows.append(["Total"] + ["-"] * 7 + [format_count(report.total_params),
                                         format_count(report.total_multiplies)])
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]

    def fmt(cells):
        return "  ".join(str(c).rjust(w) for c, w in zip(cells, widths))

    rule = "-" * len(fmt(header))
    lines = [f"cnn-{spec.name} footprint", rule, fmt(header), rule]
    lines += [fmt(r) for r in rows[:-1]]
    lines += [rule, fmt(rows[-1]), rule]
    return "\n".join(lines) + "\n"


def render_csv(report: FootprintReport):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["layer", "kind", "params", "multiplies", "output_shape"])
    for fp in report.layers:
        writer.writerow([fp.layer_index, fp.kind, fp.params, fp.multiplies,
                         "x".join(map(str, fp.output_shape))])
    writer.writerow(["total", "", report.total_params, report.total_multiplies, ""])
    return buf.getvalue()
