"""Circuit assembly: netlist cards -> compiled stochastic DAE.

The assembled system is dq(x, xi)/dt + f(x, xi) = B u(t) in modified nodal
form.  State ordering is node voltages in order of first appearance, then
inductor currents, then voltage-source currents.  B is deterministic; all
randomness enters through device parameters bound to germ components.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import RandomParameter
from .devices import (
    T_NOMINAL,
    BjtStamp,
    Bound,
    CapacitorStamp,
    DiodeStamp,
    InductorStamp,
    MosfetStamp,
    ResistorStamp,
    VoltageSourceStamp,
)
from .netlist import Netlist, parse_netlist

GROUND = "0"


class CircuitError(ValueError):
    pass


class EvalOverflowError(FloatingPointError):
    """Device evaluation produced a non-finite entry; the Newton layer damps."""


class AssemblyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PointEval:
    """One evaluation of the DAE right-hand side pieces at (x, xi)."""

    q: np.ndarray
    f: np.ndarray
    dq: np.ndarray
    df: np.ndarray


@dataclass
class StochasticCircuit:
    name: str
    node_names: list          # non-ground nodes, declaration order
    state_names: list         # v(<node>), then i(<inductor>), then i(<vsource>)
    params: tuple             # distinct RandomParameter, first-use order
    b_matrix: np.ndarray      # (n, m), deterministic
    source_names: list        # V/I device names, column order of b_matrix
    stamps: list = field(repr=False, default_factory=list)
    _sources: list = field(repr=False, default_factory=list)
    analyses: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def l(self) -> int:
        return len(self.params)

    def eval_qf(self, x, xi) -> PointEval:
        n = self.n
        q = np.zeros(n)
        f = np.zeros(n)
        dq = np.zeros((n, n))
        df = np.zeros((n, n))
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            for stamp in self.stamps:
                stamp(x, xi, q, f, dq, df)
        if not (np.isfinite(f).all() and np.isfinite(df).all()
                and np.isfinite(q).all() and np.isfinite(dq).all()):
            raise EvalOverflowError(
                f"non-finite device evaluation in circuit {self.name!r}")
        return PointEval(q, f, dq, df)

    def source_vector(self, t: float) -> np.ndarray:
        return np.array([dev.dc_value() if dev.waveform is None
                         else dev.waveform.value(t) for dev in self._sources])

    def dc_source_vector(self) -> np.ndarray:
        return np.array([dev.dc_value() for dev in self._sources])

    def ac_source_vector(self) -> np.ndarray:
        return np.array([dev.ac_mag for dev in self._sources])

    def source_column(self, name: str) -> int:
        return self.source_names.index(name)

    def nominal_germ(self) -> np.ndarray:
        return np.array([p.dist.germ_mean() for p in self.params])

    def with_source_dc(self, name: str, level: float) -> "StochasticCircuit":
        """A copy whose named V/I source has its operating point replaced."""
        import copy

        col = self.source_column(name)
        twin = copy.copy(self)
        twin._sources = list(self._sources)
        src = copy.copy(self._sources[col])
        src.dc = level
        src.waveform = None
        twin._sources[col] = src
        return twin


def _require(cond, msg):
    if not cond:
        raise CircuitError(msg)


def _as_bound(value, germ_of, owner, key):
    if isinstance(value, RandomParameter):
        return Bound(value.shift, value.scale, germ_of(value))
    if value is None:
        raise CircuitError(f"{owner}: missing value for {key}")
    return Bound(float(value))


def _param_bound(dev, key, default, germ_of):
    value = dev.params.get(key, default)
    if value is None:
        raise CircuitError(f"{dev.name}: parameter {key!r} is required")
    return _as_bound(value, germ_of, dev.name, key)


_MOS_DEFAULTS = {
    "vt0": 0.5, "kp": 2e-5, "w": 10e-6, "l": 1e-6,
    "lambda": 0.0, "temp": T_NOMINAL, "tnom": T_NOMINAL,
}
_DIODE_DEFAULTS = {"is": 1e-14, "n": 1.0, "temp": T_NOMINAL}
_BJT_DEFAULTS = {"is": 1e-16, "bf": 100.0, "br": 1.0, "temp": T_NOMINAL}


def assemble(netlist: Netlist) -> StochasticCircuit:
    """Compile parsed cards into a stamped stochastic DAE."""
    _require(netlist.devices, "cannot assemble an empty netlist")

    node_index: dict[str, int] = {}

    def node(name: str) -> int:
        if name == GROUND:
            return -1
        if name not in node_index:
            node_index[name] = len(node_index)
        return node_index[name]

    for dev in netlist.devices:
        for nm in dev.nodes:
            node(nm)
    _require(node_index, "netlist touches no non-ground node")

    node_names = sorted(node_index, key=node_index.get)
    n_nodes = len(node_names)
    inductors = [d for d in netlist.devices if d.kind == "L"]
    vsources = [d for d in netlist.devices if d.kind == "V"]
    isources = [d for d in netlist.devices if d.kind == "I"]
    branch_of = {}
    for k, dev in enumerate(inductors):
        branch_of[dev.name] = n_nodes + k
    for k, dev in enumerate(vsources):
        branch_of[dev.name] = n_nodes + len(inductors) + k

    state_names = (["v(" + nm + ")" for nm in node_names]
                   + ["i(" + d.name + ")" for d in inductors]
                   + ["i(" + d.name + ")" for d in vsources])
    n = len(state_names)

    germs: list[RandomParameter] = []

    def germ_of(par: RandomParameter) -> int:
        for k, seen in enumerate(germs):
            if seen is par:
                return k
        germs.append(par)
        return len(germs) - 1

    stamps = []
    sources = vsources + isources
    b = np.zeros((n, len(sources)))
    for col, dev in enumerate(vsources):
        b[branch_of[dev.name], col] = 1.0
    for k, dev in enumerate(isources):
        col = len(vsources) + k
        a, c = node(dev.nodes[0]), node(dev.nodes[1])
        if a >= 0:
            b[a, col] = -1.0
        if c >= 0:
            b[c, col] = 1.0

    for dev in netlist.devices:
        pins = [node(nm) for nm in dev.nodes]
        if dev.kind == "R":
            stamps.append(ResistorStamp(pins[0], pins[1],
                                        _as_bound(dev.value, germ_of, dev.name, "value")))
        elif dev.kind == "C":
            stamps.append(CapacitorStamp(pins[0], pins[1],
                                         _as_bound(dev.value, germ_of, dev.name, "value")))
        elif dev.kind == "L":
            stamps.append(InductorStamp(pins[0], pins[1], branch_of[dev.name],
                                        _as_bound(dev.value, germ_of, dev.name, "value")))
        elif dev.kind == "V":
            stamps.append(VoltageSourceStamp(pins[0], pins[1], branch_of[dev.name]))
        elif dev.kind == "I":
            pass  # enters only through B u
        elif dev.kind == "D":
            d = dict(_DIODE_DEFAULTS)
            stamps.append(DiodeStamp(
                pins[0], pins[1],
                i_sat=_param_bound(dev, "is", d["is"], germ_of),
                emission=_param_bound(dev, "n", d["n"], germ_of),
                temp=_param_bound(dev, "temp", d["temp"], germ_of),
            ))
        elif dev.kind == "M":
            mtype = dev.params.get("type", "nmos")
            _require(mtype in ("nmos", "pmos"),
                     f"{dev.name}: type must be nmos or pmos, got {mtype!r}")
            d = _MOS_DEFAULTS
            stamps.append(MosfetStamp(
                pins[0], pins[1], pins[2],
                polarity=1.0 if mtype == "nmos" else -1.0,
                vt0=_param_bound(dev, "vt0", d["vt0"], germ_of),
                kp=_param_bound(dev, "kp", d["kp"], germ_of),
                width=_param_bound(dev, "w", d["w"], germ_of),
                length=_param_bound(dev, "l", d["l"], germ_of),
                lam=_param_bound(dev, "lambda", d["lambda"], germ_of),
                temp=_param_bound(dev, "temp", d["temp"], germ_of),
                tnom=_param_bound(dev, "tnom", d["tnom"], germ_of),
            ))
        elif dev.kind == "Q":
            qtype = dev.params.get("type", "npn")
            _require(qtype in ("npn", "pnp"),
                     f"{dev.name}: type must be npn or pnp, got {qtype!r}")
            d = _BJT_DEFAULTS
            stamps.append(BjtStamp(
                pins[0], pins[1], pins[2],
                polarity=1.0 if qtype == "npn" else -1.0,
                i_sat=_param_bound(dev, "is", d["is"], germ_of),
                beta_f=_param_bound(dev, "bf", d["bf"], germ_of),
                beta_r=_param_bound(dev, "br", d["br"], germ_of),
                temp=_param_bound(dev, "temp", d["temp"], germ_of),
            ))
        else:  # pragma: no cover - parser restricts kinds
            raise CircuitError(f"unsupported device kind {dev.kind!r}")

    structural = _structural_warnings(netlist, node_names)
    for msg in structural:
        warnings.warn(msg, AssemblyWarning, stacklevel=2)

    return StochasticCircuit(
        name=netlist.title or "(untitled)",
        node_names=node_names,
        state_names=state_names,
        params=tuple(germs),
        b_matrix=b,
        source_names=[d.name for d in sources],
        stamps=stamps,
        _sources=sources,
        analyses=list(netlist.analyses),
        warnings=structural,
    )


def _structural_warnings(netlist, node_names):
    """Flag nodes with no DC path to anywhere: only capacitors or I sources."""
    kinds_at = {nm: set() for nm in node_names}
    for dev in netlist.devices:
        for nm in dev.nodes:
            if nm != GROUND:
                kinds_at[nm].add(dev.kind)
    out = []
    for nm in node_names:
        if kinds_at[nm] <= {"C", "I"}:
            out.append(f"node {nm!r} has no DC path (touched only by C/I devices); "
                       "the DC system is structurally singular")
    return out


def load_circuit(text: str) -> StochasticCircuit:
    """Parse and assemble in one step."""
    return assemble(parse_netlist(text))
