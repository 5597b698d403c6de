"""Classifier handles: built-in trainers and external model adapters.

Every model is used through the same handle interface: ``score`` returns the
probability of class 1 for one instance, ``predict`` thresholds it at 0.5
(ties go to class 1), and the batch variants do the same for many rows.
``score(x)`` is defined as ``score_batch([x])[0]`` so single and batched
scoring can never disagree.

Built-in models operate on the numeric encoding of the training statistics.
External models receive raw feature values over a line-oriented JSON
protocol, either through a long-lived subprocess or an HTTP endpoint:

    request:  {"instances": [[value, ...], ...]}
    response: {"scores": [p, ...]}

with one JSON object per line (subprocess) or per POST body (HTTP). Scores
must be numbers in [0, 1], one per instance, in order.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
import threading
import urllib.error
import urllib.request
from typing import Sequence

import numpy as np
from scipy.special import expit

from .distance import check_weights, heom_to_rows
from .errors import ConfigError, ModelIOError, TrainError
from .tabular import Dataset, FeatureStats, Instance, encode, encode_batch


class ClassifierHandle:
    """Uniform scoring interface; subclasses implement ``score_batch`` only."""

    def score_batch(self, xs: Sequence[Instance]) -> np.ndarray:
        raise NotImplementedError

    def score(self, x: Instance) -> float:
        return float(self.score_batch([x])[0])

    def predict(self, x: Instance) -> int:
        return 1 if self.score(x) >= 0.5 else 0

    def predict_batch(self, xs: Sequence[Instance]) -> np.ndarray:
        return (self.score_batch(xs) >= 0.5).astype(np.int64)


class LogisticHandle(ClassifierHandle):
    """Logistic regression over the numeric encoding."""

    def __init__(self, stats: Sequence[FeatureStats], coef: np.ndarray, intercept: float):
        self.stats = tuple(stats)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    def score_batch(self, xs: Sequence[Instance]) -> np.ndarray:
        # Row-at-a-time dot products: keeps batched scores bit-identical to
        # single-instance scores regardless of BLAS kernel selection.
        out = np.empty(len(xs), dtype=np.float64)
        for i, x in enumerate(xs):
            z = float(np.dot(encode(self.stats, x), self.coef)) + self.intercept
            out[i] = _sigmoid(z)
        return out


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def train_logistic(
    stats: Sequence[FeatureStats],
    train: Dataset,
    epochs: int = 500,
    step: float = 0.5,
    seed: int = 0,
) -> LogisticHandle:
    """Full-batch gradient descent on the mean log-loss.

    Weights start at zero, so the fit is deterministic; ``seed`` is accepted
    for interface symmetry with the other trainers but has no effect.
    """
    del seed
    if train.labels is None:
        raise TrainError("training dataset has no labels")
    if len(train) == 0:
        raise TrainError("cannot train on an empty dataset")
    if epochs < 1 or step <= 0.0:
        raise ConfigError("epochs must be >= 1 and step > 0")
    X = encode_batch(stats, train.rows)
    y = np.asarray(train.labels, dtype=np.float64)
    n = len(train)
    coef = np.zeros(X.shape[1], dtype=np.float64)
    intercept = 0.0
    for _ in range(epochs):
        z = X @ coef + intercept
        err = expit(z) - y
        coef -= step * (X.T @ err) / n
        intercept -= step * float(err.mean())
    return LogisticHandle(stats, coef, intercept)


class KnnHandle(ClassifierHandle):
    """k-nearest-neighbor vote over the training rows under the mixed-type metric."""

    def __init__(
        self,
        stats: Sequence[FeatureStats],
        train: Dataset,
        k: int,
        weights: tuple[float, ...],
    ):
        self.stats = tuple(stats)
        self.train = train
        self.k = k
        self.weights = weights
        self._labels = np.asarray(train.labels, dtype=np.float64)

    def score_batch(self, xs: Sequence[Instance]) -> np.ndarray:
        out = np.empty(len(xs), dtype=np.float64)
        for i, x in enumerate(xs):
            d = heom_to_rows(self.stats, x, self.train, self.weights)
            order = np.lexsort((np.arange(len(d)), d))[: self.k]
            out[i] = float(self._labels[order].mean())
        return out


def train_knn_classifier(
    stats: Sequence[FeatureStats],
    train: Dataset,
    k: int = 5,
    weights: Sequence[float] | None = None,
) -> KnnHandle:
    """Memorize the training rows; score = class-1 fraction among the k nearest.

    ``k`` must be odd so a vote can never split evenly, and no larger than the
    training set. Distance ties break toward the smaller row index.
    """
    if train.labels is None:
        raise TrainError("training dataset has no labels")
    if len(train) == 0:
        raise TrainError("cannot train on an empty dataset")
    if k < 1 or k % 2 == 0:
        raise ConfigError(f"k must be a positive odd number, got {k}")
    if k > len(train):
        raise ConfigError(f"k={k} exceeds training size {len(train)}")
    return KnnHandle(stats, train, k, check_weights(stats, weights))


# --- external models -------------------------------------------------------


def _json_safe(x: Instance) -> list:
    return [v if isinstance(v, str) else float(v) for v in x]


def _parse_scores(text: str, expected: int, origin: str) -> np.ndarray:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"{origin}: reply is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("scores"), list):
        raise ModelIOError(f"{origin}: reply must be an object with a 'scores' list")
    scores = doc["scores"]
    if len(scores) != expected:
        raise ModelIOError(
            f"{origin}: expected {expected} scores, got {len(scores)}"
        )
    out = np.empty(expected, dtype=np.float64)
    for i, s in enumerate(scores):
        if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
            raise ModelIOError(f"{origin}: score {i} is not a finite number: {s!r}")
        if not 0.0 <= s <= 1.0:
            raise ModelIOError(f"{origin}: score {i} out of [0, 1]: {s}")
        out[i] = float(s)
    return out


class SubprocessTransport:
    """One long-lived worker process; one JSON line out, one JSON line back."""

    def __init__(self, command: str):
        self.command = command
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    shlex.split(self.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise ModelIOError(f"cannot start '{self.command}': {exc}") from exc
        return self._proc

    def request(self, payload: dict, expected: int) -> np.ndarray:
        with self._lock:
            proc = self._ensure()
            try:
                proc.stdin.write(json.dumps(payload) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise ModelIOError(f"worker '{self.command}' pipe failed: {exc}") from exc
            if line == "":
                raise ModelIOError(f"worker '{self.command}' closed its output")
            return _parse_scores(line, expected, f"worker '{self.command}'")

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            self._proc = None


class HttpTransport:
    """Stateless POST of the same JSON payload to a scoring endpoint."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def request(self, payload: dict, expected: int) -> np.ndarray:
        req = urllib.request.Request(
            self.url,
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read().decode("utf-8")
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ModelIOError(f"endpoint {self.url}: {exc}") from exc
        return _parse_scores(body, expected, f"endpoint {self.url}")

    def close(self) -> None:
        pass


class ExternalHandle(ClassifierHandle):
    """Scores rows through a transport, ``batch_size`` instances per request."""

    def __init__(self, transport, batch_size: int):
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        self.transport = transport
        self.batch_size = batch_size

    def score_batch(self, xs: Sequence[Instance]) -> np.ndarray:
        chunks = []
        for start in range(0, len(xs), self.batch_size):
            part = xs[start : start + self.batch_size]
            payload = {"instances": [_json_safe(x) for x in part]}
            chunks.append(self.transport.request(payload, len(part)))
        if not chunks:
            return np.empty(0, dtype=np.float64)
        return np.concatenate(chunks)

    def close(self) -> None:
        self.transport.close()


def external_model(spec: str, batch_size: int = 256) -> ExternalHandle:
    """Build a handle from a model spec string.

    ``proc:CMD`` starts CMD as a worker process speaking newline-delimited
    JSON on stdin/stdout. ``http:URL`` posts to URL; the URL may carry its
    own scheme (``http:https://host/score``) or omit it (``http://host`` and
    ``http:host:8000/score`` both work).
    """
    if spec.startswith("proc:"):
        command = spec[len("proc:") :]
        if not command.strip():
            raise ConfigError("proc: model spec has an empty command")
        return ExternalHandle(SubprocessTransport(command), batch_size)
    if spec.startswith("http:"):
        rest = spec[len("http:") :]
        if rest.startswith("//"):
            url = "http:" + rest
        elif rest.startswith(("http://", "https://")):
            url = rest
        elif rest:
            url = "http://" + rest
        else:
            raise ConfigError("http: model spec has an empty URL")
        return ExternalHandle(HttpTransport(url), batch_size)
    raise ConfigError(f"unrecognized external model spec '{spec}'")
