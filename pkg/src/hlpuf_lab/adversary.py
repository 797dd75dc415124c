"""Attack implementations and the universal-unforgeability game harness.

Split attack: stagewise optimal two-hypothesis discrimination of value bits
(then, for conjugate coding, the conditional basis-bit stage). A single copy
cannot be measured twice, so each later stage samples its Helstrom measurement
against the original state (fresh-copy idealization; this only strengthens the
adversary and reproduces the analytic stage success rates exactly).

Multi-copy extraction: repeated computational-basis measurement with a
conditional conjugate-basis step; deterministic on computational-basis states,
basis-bit error exactly 2^(1-K) on conjugate-basis states.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import qstate
from .cpuf import CpufModel, random_challenges, transform_batch
from .hybrid import (ABORT, ROLE_FIRST, ROLE_SECOND, EncodingScheme, HpufDevice,
                     HlpufDevice, encode_half, int_to_bits, server_verify)

_Z_BASIS = np.eye(2, dtype=complex)
_X_BASIS = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


@dataclass
class CrpDatabase:
    """Challenge/response table; ``noisy`` marks adversarially extracted data."""

    challenges: np.ndarray  # (N, n) bits
    responses: np.ndarray   # (N, out_bits) bits
    noisy: bool = False
    source: str = "clean"

    def __post_init__(self):
        self.challenges = np.asarray(self.challenges, dtype=np.uint8)
        self.responses = np.asarray(self.responses, dtype=np.uint8)
        if self.challenges.ndim != 2 or self.responses.ndim != 2:
            raise ValueError("challenges and responses must be 2-D arrays")
        if len(self.challenges) != len(self.responses):
            raise ValueError("challenge/response counts differ")

    def __len__(self):
        return len(self.challenges)


@dataclass
class QuantumCrpDatabase:
    """Single-copy challenge/state pairs as seen by a weak adversary."""

    challenges: np.ndarray      # (N, n) bits
    states: list                # per entry: list of block PureStates

    def __post_init__(self):
        self.challenges = np.asarray(self.challenges, dtype=np.uint8)
        if len(self.challenges) != len(self.states):
            raise ValueError("challenge/state counts differ")

    def __len__(self):
        return len(self.challenges)


class SplitAttack:
    """Stagewise block extraction for one (scheme, bias, prior) configuration.

    ``prior_bases`` is the number of family bases the adversary assumes the
    device draws from uniformly (defaults to the scheme's emitted count; pass
    the full family size to reproduce the whole-family mixture analysis).
    Bias p != 1/2 is supported for conjugate coding only.
    """

    def __init__(self, scheme: EncodingScheme, p: float = 0.5,
                 prior_bases: int | None = None):
        family = scheme.family()
        self.scheme = scheme
        self.p = float(p)
        self.prior_bases = scheme.bases_used if prior_bases is None else int(prior_bases)
        if not 1 <= self.prior_bases <= len(family):
            raise ValueError("prior_bases outside the family")
        if scheme.kind != "bb84" and self.p != 0.5:
            raise ValueError("biased extraction tables only implemented for conjugate coding")
        self.n_values = 2 ** scheme.value_bits
        self._family = family
        self._build()

    def _value_prior(self, x: int) -> float:
        bits = int_to_bits(x, self.scheme.value_bits)
        prob = 1.0
        for b in bits:
            prob *= (1.0 - self.p) if b else self.p
        return prob

    def _basis_priors(self) -> np.ndarray:
        if self.scheme.kind == "bb84":
            raw = np.array([self.p, 1.0 - self.p][: self.prior_bases])
        else:
            raw = np.ones(self.prior_bases)
        return raw / raw.sum()

    def _build(self):
        dim = self.scheme.block_dim
        priors = self._basis_priors()
        rho = []
        for x in range(self.n_values):
            acc = np.zeros((dim, dim), dtype=complex)
            for theta in range(self.prior_bases):
                acc += priors[theta] * self._family.basis_state(theta, x).outer()
            rho.append(acc)

        # One two-outcome measurement per (stage, guessed-prefix) node.
        self.value_stages = []
        vbits = self.scheme.value_bits
        for s in range(vbits):
            nodes = {}
            for prefix in range(2 ** s):
                branch = [x for x in range(self.n_values) if (x >> (vbits - s)) == prefix]
                zero = [x for x in branch if ((x >> (vbits - 1 - s)) & 1) == 0]
                one = [x for x in branch if ((x >> (vbits - 1 - s)) & 1) == 1]
                w0 = sum(self._value_prior(x) for x in zero)
                w1 = sum(self._value_prior(x) for x in one)
                if w0 == 0.0 or w1 == 0.0:
                    # degenerate bias: one branch never occurs, answer it outright
                    label = 0 if w1 == 0.0 else 1
                    nodes[prefix] = qstate.TwoOutcomeMeasurement(
                        np.eye(dim, dtype=complex),
                        np.full(dim, label, dtype=np.int8))
                    continue
                mix0 = sum((self._value_prior(x) / w0) * rho[x] for x in zero)
                mix1 = sum((self._value_prior(x) / w1) * rho[x] for x in one)
                nodes[prefix] = qstate.helstrom_measurement(
                    qstate.DensityMatrix(mix0), qstate.DensityMatrix(mix1),
                    prior_a=w0 / (w0 + w1))
            self.value_stages.append(nodes)

        # Conditional basis stage (conjugate coding): discriminate the two
        # remaining same-value states, weighted by the basis-bit prior.
        self.basis_stage = None
        if self.scheme.kind == "bb84":
            self.basis_stage = {}
            for v in (0, 1):
                z = self._family.basis_state(0, v).density()
                x = self._family.basis_state(1, v).density()
                self.basis_stage[v] = qstate.helstrom_measurement(z, x, prior_a=self.p)

    def guess_block(self, state: qstate.PureState, rng: np.random.Generator) -> tuple:
        """Guessed block bits (value bits then basis bits) for one block state."""
        prefix = 0
        vbits = []
        for stage in self.value_stages:
            bit = stage[prefix].sample(state, rng)
            vbits.append(bit)
            prefix = (prefix << 1) | bit
        if self.basis_stage is not None:
            basis_bits = [self.basis_stage[prefix].sample(state, rng)]
        else:
            theta = int(rng.integers(0, self.scheme.bases_used))
            basis_bits = list(int_to_bits(theta, self.scheme.basis_bits))
        return tuple(vbits + basis_bits)

    # Vectorized path over (value, theta) arrays; probabilities are taken from
    # the same measurement objects, so object and array paths agree exactly.
    @property
    def tables(self):
        if not hasattr(self, "_tables"):
            n_theta = len(self._family)
            vbits = self.scheme.value_bits
            value_t = []
            for s, nodes in enumerate(self.value_stages):
                t = np.zeros((2 ** s, n_theta, self.n_values))
                for prefix, meas in nodes.items():
                    for theta in range(n_theta):
                        for x in range(self.n_values):
                            t[prefix, theta, x] = 1.0 - meas.probability_a(
                                self._family.basis_state(theta, x))
                value_t.append(t)
            basis_t = None
            if self.basis_stage is not None:
                basis_t = np.zeros((2, n_theta, self.n_values))
                for v, meas in self.basis_stage.items():
                    for theta in range(n_theta):
                        for x in range(self.n_values):
                            basis_t[v, theta, x] = 1.0 - meas.probability_a(
                                self._family.basis_state(theta, x))
            self._tables = (value_t, basis_t)
        return self._tables

    def guess_blocks_vectorized(self, values: np.ndarray, thetas: np.ndarray,
                                rng: np.random.Generator):
        """(guessed value ints, guessed theta ints) for arrays of true blocks."""
        value_t, basis_t = self.tables
        shape = values.shape
        prefix = np.zeros(shape, dtype=np.int64)
        for s, t in enumerate(value_t):
            p_one = t[prefix, thetas, values]
            bit = (rng.random(shape) < p_one).astype(np.int64)
            prefix = (prefix << 1) | bit
        if basis_t is not None:
            p_one = basis_t[prefix, thetas, values]
            theta_guess = (rng.random(shape) < p_one).astype(np.int64)
        else:
            theta_guess = rng.integers(0, self.scheme.bases_used, size=shape)
        return prefix, theta_guess


@lru_cache(maxsize=None)
def _cached_attack(kind: str, p: float, prior_bases) -> SplitAttack:
    from .hybrid import SCHEMES
    return SplitAttack(SCHEMES[kind], p=p, prior_bases=prior_bases)


def split_attack_extract(qdb: QuantumCrpDatabase, scheme: EncodingScheme,
                         rng: np.random.Generator, p: float = 0.5,
                         prior_bases: int | None = None) -> CrpDatabase:
    """Measure every single-copy block into guessed classical bits (noisy database)."""
    attack = _cached_attack(scheme.kind, p, prior_bases)
    rows = []
    for blocks in qdb.states:
        bits = []
        for state in blocks:
            if state.dim != scheme.block_dim:
                raise ValueError("state dimension does not match the scheme")
            bits.extend(attack.guess_block(state, rng))
        rows.append(bits)
    return CrpDatabase(challenges=qdb.challenges, responses=np.array(rows, dtype=np.uint8),
                       noisy=True, source="extracted")


def multi_copy_extract(copies, rng: np.random.Generator) -> tuple:
    """(value bit, basis bit) from K >= 2 identical conjugate-coding copies.

    Computational-basis repetition over the copies; the first disagreement
    proves a conjugate-basis state and the next copy, when available, is read
    in the conjugate basis (otherwise the value bit is a coin flip).
    """
    copies = list(copies)
    if len(copies) < 2:
        raise ValueError("need at least 2 copies")
    if any(c.dim != 2 for c in copies):
        raise ValueError("copies must be qubits")
    prev = None
    for i, copy in enumerate(copies):
        out, _ = qstate.measure(copy, _Z_BASIS, rng)
        if prev is not None and out != prev:
            if i + 1 < len(copies):
                xout, _ = qstate.measure(copies[i + 1], _X_BASIS, rng)
                return xout, 1
            return int(rng.integers(0, 2)), 1
        prev = out
    return prev, 0


def intercept_resend(state: qstate.PureState, rng: np.random.Generator) -> tuple:
    """Measure in a uniformly random conjugate-coding basis and resend the post-state.

    Returns (resent state, recorded outcome bit, basis guess).
    """
    if state.dim != 2:
        raise ValueError("intercept_resend handles qubits only")
    guess = int(rng.integers(0, 2))
    basis = _Z_BASIS if guess == 0 else _X_BASIS
    outcome, post = qstate.measure(state, basis, rng)
    return post, outcome, guess


# ---------------------------------------------------------------------------
# Logistic-regression modeling attack
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LrConfig:
    """Trainer settings; all defaults are recorded in outputs."""

    seed: int = 0
    epochs: int = 200
    batch_size: int = 256
    restarts: int = 5
    val_fraction: float = 0.1
    step_init: float = 0.02
    step_up: float = 1.2
    step_down: float = 0.5
    step_min: float = 1e-6
    step_max: float = 1.0
    stop_validation: float = 0.99
    patience: int = 25


@dataclass
class LrModel:
    """Product-of-thresholds model: P(bit=1 | c) = sigmoid(-prod_l <w_l, Phi(c)>)."""

    weights: np.ndarray  # (k, n+1)
    config: LrConfig
    validation_accuracy: float
    diverged: bool = False

    def decision(self, challenges: np.ndarray) -> np.ndarray:
        phi = transform_batch(np.asarray(challenges, dtype=np.uint8))
        return np.prod(phi @ self.weights.T, axis=1)

    def predict(self, challenges: np.ndarray) -> np.ndarray:
        return (self.decision(challenges) < 0.0).astype(np.uint8)

    def accuracy(self, challenges: np.ndarray, bits: np.ndarray) -> float:
        return float(np.mean(self.predict(challenges) == np.asarray(bits, dtype=np.uint8)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lr_train(db: CrpDatabase, target: int, k: int, config: LrConfig) -> LrModel:
    """Fit one response-bit model by RProp-style mini-batch gradient descent.

    Deterministic per (db, config.seed). Keeps the best of config.restarts
    random restarts by validation accuracy; a diverging restart returns its
    best-so-far weights with the flag set.
    """
    if len(db) == 0:
        raise ValueError("empty database")
    phi = transform_batch(db.challenges)
    y = db.responses[:, target].astype(np.float64)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed & 0x7FFFFFFF, 0x10C157]))
    n_total = len(y)
    n_val = max(1, int(round(config.val_fraction * n_total)))
    perm = rng.permutation(n_total)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        train_idx = val_idx
    phi_v, y_v = phi[val_idx], y[val_idx]
    phi_t, y_t = phi[train_idx], y[train_idx]

    best_w, best_acc, diverged = None, -1.0, False
    for _ in range(config.restarts):
        w = rng.normal(0.0, 1.0, size=(k, phi.shape[1]))
        step = np.full_like(w, config.step_init)
        prev_g = np.zeros_like(w)
        restart_best_w, restart_best_acc = w.copy(), -1.0
        stall = 0
        for _epoch in range(config.epochs):
            order = rng.permutation(len(y_t))
            for lo in range(0, len(y_t), config.batch_size):
                idx = order[lo: lo + config.batch_size]
                pb = phi_t[idx]
                d = pb @ w.T
                dec = np.prod(d, axis=1)
                err = _sigmoid(-dec) - y_t[idx]  # = -dL/d(dec)
                grad = np.empty_like(w)
                for l in range(k):
                    if k == 1:
                        others = np.ones(len(idx))
                    else:
                        others = np.prod(np.delete(d, l, axis=1), axis=1)
                    grad[l] = -(err * others) @ pb / len(idx)
                agree = grad * prev_g
                step = np.where(agree > 0, np.minimum(step * config.step_up, config.step_max),
                                np.where(agree < 0, np.maximum(step * config.step_down,
                                                               config.step_min), step))
                grad = np.where(agree < 0, 0.0, grad)
                w = w - np.sign(grad) * step
                prev_g = grad
            if not np.all(np.isfinite(w)):
                diverged = True
                break
            val_pred = (np.prod(phi_v @ w.T, axis=1) < 0.0).astype(np.uint8)
            acc = float(np.mean(val_pred == y_v))
            if acc > restart_best_acc + 1e-4:
                restart_best_acc, restart_best_w = acc, w.copy()
                stall = 0
            else:
                stall += 1
            if restart_best_acc >= config.stop_validation or stall >= config.patience:
                break
        if restart_best_acc > best_acc:
            best_acc, best_w = restart_best_acc, restart_best_w
        if best_acc >= config.stop_validation:
            break
    return LrModel(weights=best_w, config=config, validation_accuracy=best_acc,
                   diverged=diverged)


# ---------------------------------------------------------------------------
# Result records
# ---------------------------------------------------------------------------

ATTACK_CSV_COLUMNS = "seed,q,scheme,k,n,m,mode,accuracy,bit_rate,epsilon_measured,runtime_ms"


@dataclass
class AttackResult:
    seed: int
    q: int
    scheme: str
    k: int
    n: int
    m: int
    mode: str
    test_accuracy: float
    extraction_bit_rate: float
    epsilon_measured: float
    runtime_s: float

    def __post_init__(self):
        if not 0.0 <= self.test_accuracy <= 1.0:
            raise ValueError("accuracy outside [0, 1]")

    def csv_row(self, with_runtime: bool = True) -> str:
        cells = [str(self.seed), str(self.q), self.scheme, str(self.k), str(self.n),
                 str(self.m), self.mode, repr(self.test_accuracy),
                 repr(self.extraction_bit_rate), repr(self.epsilon_measured)]
        if with_runtime:
            cells.append(str(int(round(self.runtime_s * 1000.0))))
        return ",".join(cells)


def append_attack_results(path, results) -> None:
    """Append rows (creating the header if absent) in the documented schema."""
    try:
        with open(path) as fh:
            has_header = fh.readline().strip() == ATTACK_CSV_COLUMNS
    except FileNotFoundError:
        has_header = False
    with open(path, "a") as fh:
        if not has_header:
            fh.write(ATTACK_CSV_COLUMNS + "\n")
        for r in results:
            fh.write(r.csv_row() + "\n")


def extraction_stats(true_responses: np.ndarray, extracted: np.ndarray) -> dict:
    """Per-bit and per-response agreement of an extracted database with ground truth."""
    t = np.asarray(true_responses, dtype=np.uint8)
    e = np.asarray(extracted, dtype=np.uint8)
    bit_rate = float(np.mean(t == e))
    response_rate = float(np.mean(np.all(t == e, axis=1)))
    return {"bit_rate": bit_rate, "response_rate": response_rate,
            "epsilon": 1.0 - response_rate}


# ---------------------------------------------------------------------------
# Universal-unforgeability game
# ---------------------------------------------------------------------------

TARGET_CPUF = "cpuf"
TARGET_HPUF = "hpuf"
TARGET_HLPUF = "hlpuf"

STRATEGY_EXACT_COPY = "exact_copy"
STRATEGY_UNIFORM_GUESS = "uniform_guess"
STRATEGY_MEASURE_FORGE = "measure_forge"
STRATEGY_MULTI_COPY = "measure_forge_multicopy"
STRATEGY_REPLAY_LOCK = "replay_lock"
STRATEGY_DIRECT_PROBE = "direct_probe"


@dataclass(frozen=True)
class GameConfig:
    """Device shape and adversary resources for the unforgeability game.

    ``q`` counts learning CRPs (distinct challenges); the multi-copy strategy
    additionally receives ``multi_copies`` copies per challenge, and its total
    device interactions are q * multi_copies.
    """

    n: int = 16
    k: int = 1
    m: int = 1  # qubits per half
    scheme_kind: str = "bb84"
    multi_copies: int = 6
    challenges_per_trial: int = 1
    verify_second_half_only: bool = False  # compare games on the same forgery surface
    lr: LrConfig = field(default_factory=LrConfig)

    def scheme(self) -> EncodingScheme:
        from .hybrid import SCHEMES
        return SCHEMES[self.scheme_kind]

    def out_bits(self) -> int:
        scheme = self.scheme()
        if self.m % scheme.qubits_per_block != 0:
            raise ValueError("m must be a whole number of blocks")
        return 2 * (self.m // scheme.qubits_per_block) * scheme.bits_per_block


def build_weak_quantum_db(device: HpufDevice, q: int, rng: np.random.Generator):
    """(QuantumCrpDatabase over both halves, ground-truth CrpDatabase)."""
    challenges = random_challenges(device.cpuf.n, q, rng)
    states, truths = [], []
    for x in challenges:
        first, second = device.hpuf_eval(x)
        states.append(list(first.states) + list(second.states))
        truths.append(first.classical_bits + second.classical_bits)
    qdb = QuantumCrpDatabase(challenges=challenges, states=states)
    truth = CrpDatabase(challenges=challenges, responses=np.array(truths, dtype=np.uint8))
    return qdb, truth


def _train_bit_models(db: CrpDatabase, k: int, lr: LrConfig, targets) -> list:
    return [lr_train(db, t, k, replace(lr, seed=lr.seed + 1009 * t)) for t in targets]


def _forge_bits(models, challenge) -> np.ndarray:
    row = np.asarray(challenge, dtype=np.uint8)[None, :]
    return np.array([mdl.predict(row)[0] for mdl in models], dtype=np.uint8)


def run_unforgeability_game(target: str, strategy: str, q: int, trials: int,
                            rng: np.random.Generator,
                            config: GameConfig | None = None,
                            return_trial_rates: bool = False):
    """Empirical win rate of a learning strategy in the unforgeability game.

    Each trial builds a fresh device from a trial-derived seed, runs the
    learning phase, then evaluates the forgery on
    ``config.challenges_per_trial`` uniformly random challenges. With
    ``return_trial_rates`` the per-trial win rates come back too, so callers
    can estimate the trial-to-trial spread.
    """
    if q < 1:
        raise ValueError("q must be positive")
    config = config or GameConfig()
    scheme = config.scheme()
    out_bits = config.out_bits()
    half = out_bits // 2
    wins = 0
    total = 0
    trial_rates = []
    for _trial in range(trials):
        child = np.random.default_rng(rng.integers(0, 2**63))
        model_seed = int(child.integers(0, 2**31 - 1))
        cpuf = CpufModel.xor_arbiter(config.n, config.k, out_bits, model_seed)
        device = HpufDevice(cpuf, scheme)
        lr = replace(config.lr, seed=int(child.integers(0, 2**31 - 1)))

        bit_models = None
        forge_uniform = False
        second_half_only = False

        if strategy == STRATEGY_EXACT_COPY:
            pass
        elif strategy == STRATEGY_UNIFORM_GUESS:
            forge_uniform = True
        elif strategy == STRATEGY_MEASURE_FORGE:
            if target == TARGET_CPUF:
                challenges = random_challenges(config.n, q, child)
                db = CrpDatabase(challenges, cpuf.eval_batch(challenges))
                bit_models = _train_bit_models(db, config.k, lr, range(out_bits))
            else:
                qdb, _truth = build_weak_quantum_db(device, q, child)
                db = split_attack_extract(qdb, scheme, child)
                second_half_only = target == TARGET_HLPUF or config.verify_second_half_only
                targets = range(half, out_bits) if second_half_only else range(out_bits)
                bit_models = _train_bit_models(db, config.k, lr, targets)
        elif strategy == STRATEGY_MULTI_COPY:
            if target != TARGET_HPUF or scheme.kind != "bb84":
                raise ValueError("multi-copy extraction targets the unlocked conjugate-coding device")
            challenges = random_challenges(config.n, q, child)
            rows = []
            for x in challenges:
                evaluations = []
                for _c in range(config.multi_copies):
                    first, second = device.hpuf_eval(x)
                    evaluations.append(list(first.states) + list(second.states))
                bits = []
                for qubit_index in range(2 * config.m):
                    copies = [ev[qubit_index] for ev in evaluations]
                    value, basis = multi_copy_extract(copies, child)
                    bits.extend([value, basis])
                rows.append(bits)
            db = CrpDatabase(challenges, np.array(rows, dtype=np.uint8),
                             noisy=True, source="extracted")
            second_half_only = config.verify_second_half_only
            targets = range(half, out_bits) if second_half_only else range(out_bits)
            bit_models = _train_bit_models(db, config.k, lr, targets)
        elif strategy == STRATEGY_REPLAY_LOCK:
            if target != TARGET_HLPUF:
                raise ValueError("replay strategy targets the locked device")
            locked = HlpufDevice(device)
            challenges = random_challenges(config.n, q, child)
            states = []
            for x in challenges:
                first, _second = device.hpuf_eval(x)  # server-side transmission
                out = locked.lock_query(x, first.states, child)
                if out is ABORT:  # honest replay always passes
                    raise AssertionError("honest replay rejected by the lock")
                states.append(list(out.states))
            qdb = QuantumCrpDatabase(challenges=challenges, states=states)
            db = split_attack_extract(qdb, scheme, child)
            bit_models = _train_bit_models(db, config.k, lr, range(half))
            second_half_only = True
        elif strategy == STRATEGY_DIRECT_PROBE:
            if target != TARGET_HLPUF:
                raise ValueError("direct probe targets the locked device")
            locked = HlpufDevice(device)
            probe = [qstate.bb84_state(0, 0) for _ in range(config.m)]
            challenges = random_challenges(config.n, q, child)
            for x in challenges:
                locked.lock_query(x, list(probe), child)
            forge_uniform = True
        else:
            raise ValueError(f"unknown strategy {strategy!r}")

        trial_wins = 0
        for _c in range(config.challenges_per_trial):
            x_star = child.integers(0, 2, size=config.n, dtype=np.uint8)
            true_bits = cpuf.eval(x_star)
            if target == TARGET_CPUF:
                if strategy == STRATEGY_EXACT_COPY:
                    guess = true_bits
                elif forge_uniform:
                    guess = child.integers(0, 2, size=out_bits, dtype=np.uint8)
                else:
                    guess = _forge_bits(bit_models, x_star)
                win = bool(np.array_equal(guess, true_bits))
            else:
                if forge_uniform:
                    bits = child.integers(0, 2, size=out_bits, dtype=np.uint8)
                elif strategy == STRATEGY_EXACT_COPY:
                    bits = true_bits
                else:
                    bits = _forge_bits(bit_models, x_star)
                if target == TARGET_HLPUF or second_half_only:
                    expected = encode_half(true_bits[half:], ROLE_SECOND, scheme)
                    forged = encode_half(bits[-half:], ROLE_SECOND, scheme)
                    win = server_verify(expected, forged.states, scheme, child)
                else:
                    expected = encode_half(true_bits, ROLE_FIRST, scheme)
                    forged = encode_half(bits, ROLE_FIRST, scheme)
                    win = server_verify(expected, forged.states, scheme, child)
            wins += int(win)
            trial_wins += int(win)
            total += 1
        trial_rates.append(trial_wins / config.challenges_per_trial)
    if return_trial_rates:
        return wins / total, np.array(trial_rates)
    return wins / total
