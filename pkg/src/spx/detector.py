"""Black-box detector handles.

Two families: synthetic detectors with analytically known behavior (used
to validate the estimators against exact Shapley values) and external
detectors driven over a newline-delimited JSON protocol ("spx/1") on the
stdin/stdout of a child process.

Synthetic handles score from a presence-vector side channel rather than
from pixels, so estimator correctness can be tested independently of
masking fidelity.  The pixel-mean detector exercises the full image path.
"""

from __future__ import annotations

import base64
import io
import json
import os
import select
import shlex
import subprocess
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from .errors import ConfigError, DetectorCrash, DetectorTimeout, ProtocolError, VersionMismatch
from .quality import BBox, Detection

PROTOCOL_VERSION = "spx/1"
DEFAULT_TIMEOUT = 30.0


def _clamp01(x):
    return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class SyntheticDetectorSpec:
    """Linear: score = clamp(w . pi + b).  Product: clamp(sum_j c_j * prod_{i in S_j} pi_i).

    Always reports ``gt_bbox`` as the detection box, so the detection
    quality equals the score itself.
    """

    gt_bbox: BBox
    weights: tuple[float, ...] | None = None
    bias: float = 0.0
    product_terms: tuple[tuple[tuple[int, ...], float], ...] | None = None
    label: str = "pedestrian"

    def __post_init__(self):
        if (self.weights is None) == (self.product_terms is None):
            raise ConfigError("synthetic spec needs exactly one of weights / product_terms")

    @property
    def n_parts(self) -> int:
        if self.weights is not None:
            return len(self.weights)
        return 1 + max(i for subset, _ in self.product_terms for i in subset)

    def value(self, presence: np.ndarray) -> np.ndarray:
        """Vectorized score for a (n, M) presence matrix (or a single vector)."""
        P = np.atleast_2d(np.asarray(presence, dtype=np.float64))
        if self.weights is not None:
            out = P @ np.asarray(self.weights) + self.bias
        else:
            out = np.full(P.shape[0], self.bias)
            for subset, coeff in self.product_terms:
                out = out + coeff * np.prod(P[:, list(subset)], axis=1)
        out = _clamp01(out)
        return out if np.asarray(presence).ndim > 1 else float(out[0])


class SyntheticDetector:
    """Pure handle around a SyntheticDetectorSpec; needs the presence side channel."""

    def __init__(self, spec: SyntheticDetectorSpec):
        self.spec = spec

    def detect(self, image=None, presence=None) -> list[Detection]:
        if presence is None:
            raise ConfigError("synthetic detector requires the presence side channel")
        score = self.spec.value(np.asarray(presence, dtype=np.float64))
        return [Detection(self.spec.gt_bbox, float(score), self.spec.label)]

    def close(self):
        pass


class PixelMeanDetector:
    """Integration-path synthetic: score = mean brightness inside gt_bbox / 255."""

    def __init__(self, gt_bbox: BBox, label: str = "pedestrian"):
        self.gt_bbox = gt_bbox
        self.label = label

    def detect(self, image, presence=None) -> list[Detection]:
        image = np.asarray(image)
        b = self.gt_bbox
        x1, y1 = max(int(b.x1), 0), max(int(b.y1), 0)
        x2, y2 = int(np.ceil(b.x2)), int(np.ceil(b.y2))
        region = image[y1:y2, x1:x2]
        if region.size == 0:
            return []
        score = float(region.mean() / 255.0)
        return [Detection(self.gt_bbox, score, self.label)]

    def close(self):
        pass


def encode_image_png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    PILImage.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def parse_detections(payload: list) -> list[Detection]:
    out = []
    for item in payload:
        try:
            bbox = BBox(*[float(v) for v in item["bbox"]])
            out.append(Detection(bbox, float(item["score"]), str(item.get("label", ""))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detection entry {item!r}: {exc}") from exc
    return out


class ExternalDetector:
    """Child-process detector speaking the spx/1 wire protocol.

    One in-flight request at a time; the first line from the child must be
    the handshake ``{"protocol": "spx/1"}``.
    """

    def __init__(self, command: str | list[str], timeout: float = DEFAULT_TIMEOUT):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
            )
        except OSError as exc:
            raise DetectorCrash(f"cannot spawn detector {argv!r}: {exc}") from exc
        self.timeout = timeout
        self._buf = b""
        self._next_id = 0
        self.protocol = self._handshake()

    def _read_line(self) -> bytes:
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buf:
            if self._proc.poll() is not None:
                raise DetectorCrash(f"detector exited with code {self._proc.returncode}")
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                raise DetectorTimeout(f"no response within {self.timeout} s")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise DetectorCrash("detector closed its stdout")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def _read_json(self) -> dict:
        line = self._read_line()
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON from detector: {line[:200]!r}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError(f"expected JSON object, got {type(msg).__name__}")
        return msg

    def _handshake(self) -> str:
        msg = self._read_json()
        proto = msg.get("protocol")
        if not isinstance(proto, str):
            raise ProtocolError(f"handshake missing protocol field: {msg!r}")
        major = proto.split("/", 1)[0]
        if proto != PROTOCOL_VERSION and major == PROTOCOL_VERSION.split("/")[0]:
            raise VersionMismatch(f"unsupported protocol version {proto!r}")
        if major != PROTOCOL_VERSION.split("/")[0]:
            raise VersionMismatch(f"unknown protocol {proto!r}")
        return proto

    def detect(self, image, presence=None) -> list[Detection]:
        req_id = self._next_id
        self._next_id += 1
        request = {"id": req_id, "image_png_b64": encode_image_png_b64(image)}
        try:
            self._proc.stdin.write(json.dumps(request).encode() + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise DetectorCrash(f"detector stdin closed: {exc}") from exc
        msg = self._read_json()
        if msg.get("id") != req_id:
            raise ProtocolError(f"response id {msg.get('id')!r} != request id {req_id}")
        if "detections" not in msg or not isinstance(msg["detections"], list):
            raise ProtocolError(f"response missing detections list: {msg!r}")
        return parse_detections(msg["detections"])

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def linear_spec(weights, bias: float, gt_bbox: BBox) -> SyntheticDetectorSpec:
    return SyntheticDetectorSpec(gt_bbox=gt_bbox, weights=tuple(float(w) for w in weights), bias=float(bias))


def product_spec(terms, gt_bbox: BBox, bias: float = 0.0) -> SyntheticDetectorSpec:
    norm = tuple((tuple(int(i) for i in subset), float(c)) for subset, c in terms)
    return SyntheticDetectorSpec(gt_bbox=gt_bbox, product_terms=norm, bias=float(bias))
