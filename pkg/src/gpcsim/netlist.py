"""Line-oriented netlist grammar with engineering notation and diagnostics.

Element cards are `<name> <node...> <value|key=value...>`, keywords are case
insensitive and `*` starts a comment.  Values are plain numbers with the
usual suffixes (f, p, n, u, m, k, meg, g, t) or stochastic bindings written
`dist=<kind>(<args>)` for an inline germ or `dist=<name>` to reference a
`.param` declaration.  Supported analyses: `.dc`, `.dcsweep <src> <start>
<stop> <step>`, `.tran <tstop> [hmax]`, `.ac <fstart> <fstop> <pts/decade>`.

Parsing never stops at the first problem: all diagnostics are collected and
raised together with line/column positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .basis import Beta, Gamma, Gaussian, RandomParameter, Uniform

_NUMBER_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)(meg|k|m|u|n|p|f|g|t)?$")
_SUFFIX = {"k": 1e3, "m": 1e-3, "u": 1e-6, "n": 1e-9, "p": 1e-12,
           "f": 1e-15, "meg": 1e6, "g": 1e9, "t": 1e12}
_IDENT_RE = re.compile(r"^[a-z_][a-z0-9_.]*$")

DEVICE_LETTERS = {"r", "c", "l", "v", "i", "d", "m", "q"}


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self):
        return f"line {self.line}, col {self.col}: {self.message}"


class NetlistError(ValueError):
    """Raised after a full parse pass; carries every diagnostic found."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__(
            "netlist has {} problem(s):\n  {}".format(
                len(self.diagnostics), "\n  ".join(str(d) for d in self.diagnostics)
            )
        )


def parse_number(text: str) -> float:
    """A float with an optional engineering suffix (f through t)."""
    m = _NUMBER_RE.match(text.strip().lower())
    if not m:
        raise ValueError(f"not a number: {text!r}")
    return float(m.group(1)) * _SUFFIX.get(m.group(2), 1.0)


# --------------------------------------------------------------------------
# waveforms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DcWave:
    level: float

    def value(self, t):
        return self.level


@dataclass(frozen=True)
class SinWave:
    offset: float
    amplitude: float
    freq: float
    delay: float = 0.0
    damping: float = 0.0

    def value(self, t):
        import math

        if t < self.delay:
            return self.offset
        dt = t - self.delay
        return self.offset + self.amplitude * math.exp(-self.damping * dt) * math.sin(
            2.0 * math.pi * self.freq * dt
        )


@dataclass(frozen=True)
class PulseWave:
    v1: float
    v2: float
    delay: float
    rise: float
    fall: float
    width: float
    period: float

    def value(self, t):
        if t < self.delay:
            return self.v1
        tau = (t - self.delay) % self.period
        if tau < self.rise:
            return self.v1 + (self.v2 - self.v1) * tau / self.rise
        tau -= self.rise
        if tau < self.width:
            return self.v2
        tau -= self.width
        if tau < self.fall:
            return self.v2 + (self.v1 - self.v2) * tau / self.fall
        return self.v1


@dataclass(frozen=True)
class PwlWave:
    times: tuple
    values: tuple

    def value(self, t):
        ts, vs = self.times, self.values
        if t <= ts[0]:
            return vs[0]
        if t >= ts[-1]:
            return vs[-1]
        for k in range(1, len(ts)):
            if t <= ts[k]:
                frac = (t - ts[k - 1]) / (ts[k] - ts[k - 1])
                return vs[k - 1] + frac * (vs[k] - vs[k - 1])
        return vs[-1]


# --------------------------------------------------------------------------
# cards and analyses
# --------------------------------------------------------------------------

@dataclass
class DeviceCard:
    kind: str                # one of R C L V I D M Q
    name: str
    nodes: tuple
    value: object = None     # float or RandomParameter (R/C/L principal value)
    params: dict = field(default_factory=dict)   # named bindings for D/M/Q
    waveform: object = None  # V/I transient waveform
    dc: float | None = None  # explicit operating-point value for V/I
    ac_mag: float = 0.0
    line: int = 0

    def dc_value(self) -> float:
        if self.dc is not None:
            return self.dc
        if self.waveform is not None:
            return self.waveform.value(0.0)
        return 0.0


@dataclass(frozen=True)
class DcAnalysis:
    pass


@dataclass(frozen=True)
class DcSweepAnalysis:
    source: str
    start: float
    stop: float
    step: float


@dataclass(frozen=True)
class TranAnalysis:
    tstop: float
    hmax: float | None = None


@dataclass(frozen=True)
class AcAnalysis:
    fstart: float
    fstop: float
    points_per_decade: int


@dataclass
class Netlist:
    title: str
    devices: list
    params: dict            # declared RandomParameter by name
    analyses: list

    def device(self, name: str):
        for dev in self.devices:
            if dev.name == name:
                return dev
        raise KeyError(name)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _split_outside_parens(line: str):
    """Whitespace-split that keeps parenthesized groups whole; yields (tok, col)."""
    toks = []
    depth = 0
    cur = []
    start = 0
    for i, ch in enumerate(line):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(depth - 1, 0)
        if ch.isspace() and depth == 0:
            if cur:
                toks.append(("".join(cur), start + 1))
                cur = []
        else:
            if not cur:
                start = i
            cur.append(ch)
    if cur:
        toks.append(("".join(cur), start + 1))
    return toks


_DIST_CALL_RE = re.compile(r"^([a-z]+)\((.*)\)$")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.diags: list[Diagnostic] = []
        self.devices: list[DeviceCard] = []
        self.params: dict[str, RandomParameter] = {}
        self.analyses = []
        self.title = ""
        self._pending_refs = []  # (line, col, name, setter)

    def error(self, line, col, msg):
        self.diags.append(Diagnostic(line, col, msg))

    # -- value expressions --------------------------------------------------

    def make_distribution(self, kind, args, line, col, name):
        try:
            vals = [parse_number(a) for a in args]
        except ValueError as exc:
            self.error(line, col, f"malformed distribution argument: {exc}")
            return None
        try:
            if kind == "gauss":
                if len(vals) != 2:
                    raise ValueError("gauss takes (mu, sigma)")
                if vals[1] <= 0:
                    raise ValueError("gauss sigma must be positive")
                return RandomParameter(name, Gaussian(), shift=vals[0], scale=vals[1])
            if kind == "gamma":
                if len(vals) != 3:
                    raise ValueError("gamma takes (gamma, shift, scale)")
                return RandomParameter(name, Gamma(vals[0]), shift=vals[1], scale=vals[2])
            if kind == "beta":
                if len(vals) != 4:
                    raise ValueError("beta takes (alpha, beta, shift, scale)")
                return RandomParameter(name, Beta(vals[0], vals[1]), shift=vals[2], scale=vals[3])
            if kind == "uniform":
                if len(vals) != 2:
                    raise ValueError("uniform takes (lo, hi)")
                lo, hi = vals
                if not hi > lo:
                    raise ValueError("uniform needs hi > lo")
                return RandomParameter(name, Uniform(), shift=(lo + hi) / 2, scale=(hi - lo) / 2)
            raise ValueError(f"unknown distribution kind {kind!r}")
        except ValueError as exc:
            self.error(line, col, f"malformed distribution: {exc}")
            return None

    def parse_binding(self, tok, line, col, owner):
        """A number, an inline dist=kind(...), or a dist=<param> reference."""
        if tok.startswith("dist="):
            spec = tok[5:]
            m = _DIST_CALL_RE.match(spec)
            if m:
                kind, argstr = m.group(1), m.group(2)
                args = [a for a in re.split(r"[,\s]+", argstr.strip()) if a]
                return self.make_distribution(kind, args, line, col, owner)
            if _IDENT_RE.match(spec):
                holder = {"value": None}

                def setter(par, holder=holder):
                    holder["value"] = par

                self._pending_refs.append((line, col, spec, holder))
                return holder  # resolved to a RandomParameter after .param scan
            self.error(line, col, f"malformed dist= expression {tok!r}")
            return None
        try:
            return parse_number(tok)
        except ValueError:
            self.error(line, col, f"expected a value or dist= binding, got {tok!r}")
            return None

    # -- cards ---------------------------------------------------------------

    def parse_two_terminal(self, kind, name, toks, line):
        if len(toks) != 3:
            self.error(line, toks[0][1] if toks else 1,
                       f"{name}: expected <n+> <n-> <value>, got {len(toks)} fields")
            return
        binding = self.parse_binding(toks[2][0], line, toks[2][1], name)
        self.devices.append(
            DeviceCard(kind=kind, name=name, nodes=(toks[0][0], toks[1][0]),
                       value=binding, line=line)
        )

    def parse_source(self, kind, name, toks, line):
        if len(toks) < 2:
            self.error(line, 1, f"{name}: source needs two nodes")
            return
        nodes = (toks[0][0], toks[1][0])
        waveform = None
        dc = None
        ac = 0.0
        rest = toks[2:]
        i = 0
        while i < len(rest):
            tok, col = rest[i]
            m = _DIST_CALL_RE.match(tok)
            if tok == "dc" or tok == "ac":
                if i + 1 >= len(rest):
                    self.error(line, col, f"{tok} needs a value")
                    break
                try:
                    val = parse_number(rest[i + 1][0])
                    if tok == "dc":
                        dc = val
                    else:
                        ac = val
                except ValueError as exc:
                    self.error(line, rest[i + 1][1], str(exc))
                i += 2
                continue
            if m:
                wave_kind, argstr = m.group(1), m.group(2)
                args = [a for a in re.split(r"[,\s]+", argstr.strip()) if a]
                waveform = self.parse_waveform(wave_kind, args, line, col, name)
                i += 1
                continue
            try:
                dc = parse_number(tok)  # bare number means a DC level
            except ValueError:
                self.error(line, col, f"{name}: unrecognized source field {tok!r}")
            i += 1
        self.devices.append(
            DeviceCard(kind=kind, name=name, nodes=nodes, waveform=waveform,
                       dc=dc, ac_mag=ac, line=line)
        )

    def parse_waveform(self, kind, args, line, col, owner):
        try:
            vals = [parse_number(a) for a in args]
        except ValueError as exc:
            self.error(line, col, f"{owner}: bad waveform argument: {exc}")
            return None
        if kind == "sin":
            if not 3 <= len(vals) <= 5:
                self.error(line, col, f"{owner}: sin takes (offset, ampl, freq[, delay[, damping]])")
                return None
            return SinWave(*vals)
        if kind == "pulse":
            if len(vals) != 7:
                self.error(line, col, f"{owner}: pulse takes (v1, v2, td, tr, tf, pw, per)")
                return None
            if vals[3] <= 0 or vals[4] <= 0 or vals[6] <= 0:
                self.error(line, col, f"{owner}: pulse rise/fall/period must be positive")
                return None
            return PulseWave(*vals)
        if kind == "pwl":
            if len(vals) < 4 or len(vals) % 2:
                self.error(line, col, f"{owner}: pwl takes (t1, v1, t2, v2, ...)")
                return None
            times = tuple(vals[0::2])
            if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
                self.error(line, col, f"{owner}: pwl times must increase")
                return None
            return PwlWave(times, tuple(vals[1::2]))
        self.error(line, col, f"{owner}: unknown waveform {kind!r}")
        return None

    def parse_three_terminal(self, kind, name, toks, line, n_nodes):
        if len(toks) < n_nodes:
            self.error(line, 1, f"{name}: expected {n_nodes} nodes")
            return
        nodes = tuple(t[0] for t in toks[:n_nodes])
        params = {}
        for tok, col in toks[n_nodes:]:
            if "=" not in tok:
                self.error(line, col, f"{name}: expected key=value, got {tok!r}")
                continue
            key, _, valstr = tok.partition("=")
            if key == "type":
                params[key] = valstr  # model flavor, e.g. nmos/pmos/npn/pnp
                continue
            binding = self.parse_binding(valstr, line, col, f"{name}.{key}")
            if binding is not None:
                params[key] = binding
        self.devices.append(
            DeviceCard(kind=kind, name=name, nodes=nodes, params=params, line=line)
        )

    # -- directives ------------------------------------------------------

    def parse_directive(self, toks, line):
        word = toks[0][0]
        args = toks[1:]
        if word == ".end":
            return "stop"
        if word == ".param":
            if len(args) != 2:
                self.error(line, toks[0][1], ".param takes <name> dist=<spec>")
                return None
            pname = args[0][0]
            if pname in self.params:
                self.error(line, args[0][1], f"duplicate parameter {pname!r}")
                return None
            binding = self.parse_binding(args[1][0], line, args[1][1], pname)
            if isinstance(binding, RandomParameter):
                self.params[pname] = binding
            elif binding is not None:
                self.error(line, args[1][1], ".param requires a dist=<kind>(...) spec")
            return None
        if word == ".dc":
            self.analyses.append(DcAnalysis())
            return None
        if word == ".dcsweep":
            if len(args) != 4:
                self.error(line, toks[0][1], ".dcsweep takes <source> <start> <stop> <step>")
                return None
            try:
                start, stop, step = (parse_number(a[0]) for a in args[1:])
            except ValueError as exc:
                self.error(line, args[1][1], str(exc))
                return None
            if step <= 0:
                self.error(line, args[3][1], ".dcsweep step must be positive")
                return None
            self.analyses.append(DcSweepAnalysis(args[0][0], start, stop, step))
            return None
        if word == ".tran":
            if len(args) not in (1, 2):
                self.error(line, toks[0][1], ".tran takes <tstop> [hmax]")
                return None
            try:
                tstop = parse_number(args[0][0])
                hmax = parse_number(args[1][0]) if len(args) == 2 else None
            except ValueError as exc:
                self.error(line, args[0][1], str(exc))
                return None
            if tstop <= 0:
                self.error(line, args[0][1], ".tran tstop must be positive")
                return None
            self.analyses.append(TranAnalysis(tstop, hmax))
            return None
        if word == ".ac":
            if len(args) != 3:
                self.error(line, toks[0][1], ".ac takes <fstart> <fstop> <points-per-decade>")
                return None
            try:
                fstart, fstop, ppd = (parse_number(a[0]) for a in args)
            except ValueError as exc:
                self.error(line, args[0][1], str(exc))
                return None
            if fstart <= 0 or fstop < fstart or ppd < 1:
                self.error(line, args[0][1], ".ac needs 0 < fstart <= fstop and pts/decade >= 1")
                return None
            self.analyses.append(AcAnalysis(fstart, fstop, int(ppd)))
            return None
        self.error(line, toks[0][1], f"unknown directive {word!r}")
        return None

    # -- driver ------------------------------------------------------------

    def run(self) -> Netlist:
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.split("*", 1)[0] if not raw.lstrip().startswith("*") else ""
            if raw.lstrip().startswith("*") and not self.title:
                self.title = raw.lstrip().lstrip("*").strip()
            if not line.strip():
                continue
            toks = _split_outside_parens(line.lower())
            if not toks:
                continue
            head, col = toks[0]
            if head.startswith("."):
                if self.parse_directive(toks, lineno) == "stop":
                    break
                continue
            letter = head[0]
            if letter not in DEVICE_LETTERS:
                self.error(lineno, col, f"unknown device kind {head!r}")
                continue
            if any(d.name == head for d in self.devices):
                self.error(lineno, col, f"duplicate device name {head!r}")
                continue
            body = toks[1:]
            if letter in ("r", "c", "l"):
                self.parse_two_terminal(letter.upper(), head, body, lineno)
            elif letter in ("v", "i"):
                self.parse_source(letter.upper(), head, body, lineno)
            elif letter == "d":
                self.parse_three_terminal("D", head, body, lineno, 2)
            elif letter == "m":
                self.parse_three_terminal("M", head, body, lineno, 3)
            elif letter == "q":
                self.parse_three_terminal("Q", head, body, lineno, 3)
        self.resolve_references()
        self.validate()
        if self.diags:
            raise NetlistError(self.diags)
        return Netlist(self.title, self.devices, self.params, self.analyses)

    def resolve_references(self):
        for line, col, name, holder in self._pending_refs:
            par = self.params.get(name)
            if par is None:
                self.error(line, col, f"dist= references undeclared parameter {name!r}")
            else:
                holder["value"] = par
        # swap holder dicts for their resolved parameters
        for dev in self.devices:
            if isinstance(dev.value, dict):
                dev.value = dev.value["value"]
            for key, binding in list(dev.params.items()):
                if isinstance(binding, dict):
                    dev.params[key] = binding["value"]

    def validate(self):
        if not self.devices:
            self.error(1, 1, "netlist declares no devices")
            return
        touch = {}
        for dev in self.devices:
            for node in dev.nodes:
                touch[node] = touch.get(node, 0) + 1
        if "0" not in touch:
            self.error(1, 1, "ground node '0' is missing")
        for node, count in sorted(touch.items()):
            if node != "0" and count < 2:
                dev = next(d for d in self.devices if node in d.nodes)
                self.error(dev.line, 1, f"node {node!r} is connected to only one terminal")
        for an in self.analyses:
            if isinstance(an, DcSweepAnalysis):
                src = next((d for d in self.devices if d.name == an.source), None)
                if src is None or src.kind not in ("V", "I"):
                    line = 1
                    self.error(line, 1, f".dcsweep source {an.source!r} is not a V/I source")


def parse_netlist(text: str) -> Netlist:
    """Parse netlist text; raises NetlistError listing every diagnostic."""
    return _Parser(text).run()
