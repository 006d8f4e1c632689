"""Live newline-delimited JSON service running the trial state machine.

Transport is plain TCP, one JSON object per line. A thin adapter also
accepts a standard browser WebSocket connection (detected by the leading
HTTP request line) and maps one text frame to one message, so a browser
client speaks the same protocol without a proxy. One client is served at
a time; a live assistive session has exactly one operator.

Every message carries "type" and "t_us". All outbound messages and all
inbound gaze samples are stamped from a single strictly increasing
server-monotonic microsecond clock, so the session the service records is
exactly what it decided on: classifying the persisted files offline
reproduces the live decisions bit for bit.

Inbound messages and the flash schedule are two logical producers; both
funnel through one inbox queue consumed by the single driver coroutine,
which is the only writer to the per-trial accumulator and to the socket.
"""
from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .core import AoiLayout, GazeSample, StimulusEvent, TrialBundle
from .eeg import GnbModel
from .fusion import FusionConfig, classify_trial
from .gaze import EmptyTrialError
from .session_io import Session, SessionManifest, save_session
from .simulate import make_sequence, unit_direction

PROTOCOL_VERSION = 1
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class _Disconnect(Exception):
    """Client went away (EOF or malformed stream)."""


class _Violation(Exception):
    """Protocol violation; carries (code, detail) for the error message."""

    def __init__(self, code: str, detail: str) -> None:
        super().__init__(detail)
        self.code = code
        self.detail = detail


@dataclass
class ServeConfig:
    """Everything the live service needs besides the socket."""

    model: GnbModel
    layout: AoiLayout
    fusion: FusionConfig = field(default_factory=FusionConfig)
    trials: int = 7
    repetitions: int = 10
    flash_ms: float = 100.0
    isi_ms: float = 75.0
    eeg_separation: float = 6.0
    seed: int = 0
    record_dir: Path = Path("live")
    gaze_rate_hz: float = 60.0
    eeg_rate_hz: float = 256.0

    def __post_init__(self) -> None:
        if self.trials < 1 or self.repetitions < 1:
            raise ValueError("trials and repetitions must be >= 1")
        if self.flash_ms <= 0 or self.isi_ms < 0:
            raise ValueError("flash_ms must be > 0 and isi_ms >= 0")
        if self.eeg_separation < 0:
            raise ValueError("eeg_separation must be >= 0")

    @property
    def soa_s(self) -> float:
        return (self.flash_ms + self.isi_ms) / 1000.0


@dataclass
class LiveSessionState:
    """Mutable trial state machine data.

    Phases: idle, calibrating (reserved), trial-running, deciding. The gaze
    buffer is cleared at each trial start and a decision is emitted at most
    once per trial index.
    """

    phase: str = "idle"
    trial: int = 0
    gaze_buffer: List[GazeSample] = field(default_factory=list)
    events: List[StimulusEvent] = field(default_factory=list)
    feature_rows: List[np.ndarray] = field(default_factory=list)
    decided: set = field(default_factory=set)

    def start_trial(self, trial: int) -> None:
        self.phase = "trial-running"
        self.trial = trial
        self.gaze_buffer.clear()
        self.events.clear()
        self.feature_rows.clear()

    def record_decision(self, trial: int) -> None:
        if trial in self.decided:
            raise AssertionError(f"second decision for trial {trial}")
        self.decided.add(trial)


class _Clock:
    """Strictly increasing microseconds since server start."""

    def __init__(self) -> None:
        self._origin = time.monotonic_ns()
        self._last = -1

    def stamp(self) -> int:
        t = (time.monotonic_ns() - self._origin) // 1000
        if t <= self._last:
            t = self._last + 1
        self._last = t
        return t


class _TcpTransport:
    """One JSON text per LF-terminated line."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter,
                 first_line: bytes = b"") -> None:
        self._reader = reader
        self._writer = writer
        self._pending = first_line

    async def recv(self) -> Optional[str]:
        if self._pending:
            line, self._pending = self._pending, b""
        else:
            try:
                line = await self._reader.readline()
            except (ValueError, ConnectionError):
                return None
        if not line:
            return None
        return line.decode("utf-8", errors="replace").rstrip("\r\n")

    async def send(self, text: str) -> None:
        self._writer.write(text.encode("utf-8") + b"\n")
        await self._writer.drain()

    async def close(self) -> None:
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class _WsTransport:
    """Minimal RFC 6455 server endpoint: one text frame per message."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self._reader = reader
        self._writer = writer
        self._closed = False

    @classmethod
    async def handshake(cls, reader: asyncio.StreamReader, writer: asyncio.StreamWriter,
                        request_line: bytes) -> "_WsTransport":
        headers = {}
        while True:
            line = await reader.readline()
            if line in (b"\r\n", b"\n", b""):
                break
            name, _, value = line.decode("latin-1").partition(":")
            headers[name.strip().lower()] = value.strip()
        key = headers.get("sec-websocket-key")
        if not key or "websocket" not in headers.get("upgrade", "").lower():
            writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            await writer.drain()
            raise _Disconnect("not a websocket upgrade")
        accept = base64.b64encode(
            hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()).decode("ascii")
        writer.write(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\n"
            b"Connection: Upgrade\r\n"
            b"Sec-WebSocket-Accept: " + accept.encode("ascii") + b"\r\n\r\n")
        await writer.drain()
        return cls(reader, writer)

    async def _read_frame(self) -> Tuple[int, bool, bytes]:
        head = await self._reader.readexactly(2)
        fin = bool(head[0] & 0x80)
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        length = head[1] & 0x7F
        if length == 126:
            length = int.from_bytes(await self._reader.readexactly(2), "big")
        elif length == 127:
            length = int.from_bytes(await self._reader.readexactly(8), "big")
        if length > 1 << 20:
            raise _Disconnect("oversized frame")
        mask = await self._reader.readexactly(4) if masked else b""
        payload = await self._reader.readexactly(length)
        if masked:
            payload = bytes(b ^ mask[i & 3] for i, b in enumerate(payload))
        elif length:
            # Client frames must be masked per the RFC.
            raise _Disconnect("unmasked client frame")
        return opcode, fin, payload

    async def recv(self) -> Optional[str]:
        buffer = b""
        in_message = False
        while True:
            try:
                opcode, fin, payload = await self._read_frame()
            except (asyncio.IncompleteReadError, ConnectionError, _Disconnect):
                return None
            if opcode == 0x8:  # close
                await self._send_raw(0x8, payload[:2])
                return None
            if opcode == 0x9:  # ping
                await self._send_raw(0xA, payload)
                continue
            if opcode == 0xA:  # pong
                continue
            if opcode == 0x1 and not in_message:
                buffer, in_message = payload, True
            elif opcode == 0x0 and in_message:
                buffer += payload
            else:
                return None  # binary or stray continuation
            if fin:
                return buffer.decode("utf-8", errors="replace").rstrip("\r\n")

    async def _send_raw(self, opcode: int, payload: bytes) -> None:
        if self._closed:
            return
        head = bytes([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head += bytes([n])
        elif n < 1 << 16:
            head += bytes([126]) + n.to_bytes(2, "big")
        else:
            head += bytes([127]) + n.to_bytes(8, "big")
        self._writer.write(head + payload)
        await self._writer.drain()

    async def send(self, text: str) -> None:
        await self._send_raw(0x1, text.encode("utf-8"))

    async def close(self) -> None:
        try:
            await self._send_raw(0x8, b"")
        except (ConnectionError, OSError):
            pass
        self._closed = True
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class LiveServer:
    """Accepts one client and drives sessions of scripted-EEG live trials."""

    def __init__(self, cfg: ServeConfig, host: str = "127.0.0.1", port: int = 0,
                 once: bool = False) -> None:
        self.cfg = cfg
        self.host = host
        self.port = port
        self.once = once
        self.saved_sessions: List[Path] = []
        self._server: Optional[asyncio.base_events.Server] = None
        self._busy = False
        self._session_counter = 0
        self._done = asyncio.Event()

    async def start(self) -> Tuple[str, int]:
        self._server = await asyncio.start_server(
            self._on_connect, self.host, self.port, limit=1 << 20)
        sock = self._server.sockets[0].getsockname()
        self.port = sock[1]
        return sock[0], sock[1]

    async def serve_until_done(self) -> None:
        """Run until close() is called (or the first client leaves, if once)."""
        assert self._server is not None
        async with self._server:
            await self._done.wait()

    def close(self) -> None:
        self._done.set()

    async def _on_connect(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        clock = _Clock()
        if self._busy:
            writer.write(json.dumps({
                "type": "error", "t_us": clock.stamp(),
                "code": "busy", "detail": "another client is connected",
            }).encode("utf-8") + b"\n")
            await writer.drain()
            writer.close()
            return
        self._busy = True
        try:
            first = await reader.readline()
            if not first:
                return
            if first.startswith(b"GET "):
                transport = await _WsTransport.handshake(reader, writer, first)
            else:
                transport = _TcpTransport(reader, writer, first_line=first)
            await _ClientDriver(self, transport, clock).run()
        except _Disconnect:
            pass
        finally:
            self._busy = False
            try:
                writer.close()
            except OSError:
                pass
            if self.once:
                self._done.set()

    def next_record_dir(self) -> Path:
        self._session_counter += 1
        return Path(self.cfg.record_dir) / f"live{self._session_counter:02d}"


class _ClientDriver:
    """The single consumer of one client's inbox; owns all state and I/O."""

    def __init__(self, server: LiveServer, transport, clock: _Clock) -> None:
        self.server = server
        self.cfg = server.cfg
        self.transport = transport
        self.clock = clock
        self.state = LiveSessionState()
        self.inbox: asyncio.Queue = asyncio.Queue()
        self._reader_task: Optional[asyncio.Task] = None

    async def _reader_loop(self) -> None:
        while True:
            text = await self.transport.recv()
            if text is None:
                await self.inbox.put(None)
                return
            if not text.strip():
                continue
            try:
                msg = json.loads(text)
            except json.JSONDecodeError:
                msg = {"_malformed": text[:80]}
            await self.inbox.put(msg)

    async def _send(self, msg: dict) -> None:
        msg = {"type": msg.pop("type"), "t_us": self.clock.stamp(), **msg}
        await self.transport.send(json.dumps(msg))

    async def _error(self, code: str, detail: str) -> None:
        await self._send({"type": "error", "code": code, "detail": detail})

    async def _next(self) -> dict:
        msg = await self.inbox.get()
        if msg is None:
            raise _Disconnect("client left")
        if not isinstance(msg, dict) or "_malformed" in msg or "type" not in msg:
            raise _Violation("malformed", "messages must be JSON objects with a type")
        return msg

    async def run(self) -> None:
        self._reader_task = asyncio.create_task(self._reader_loop())
        try:
            await self._run_protocol()
        except _Violation as v:
            try:
                await self._error(v.code, v.detail)
            except (ConnectionError, OSError):
                pass
        except (_Disconnect, ConnectionError, OSError):
            pass
        finally:
            self._reader_task.cancel()
            try:
                await self.transport.close()
            except (ConnectionError, OSError):
                pass

    async def _run_protocol(self) -> None:
        msg = await self._next()
        if msg.get("type") != "hello":
            raise _Violation("expected-hello", "first message must be hello")
        if msg.get("protocol") != PROTOCOL_VERSION:
            raise _Violation("protocol-version",
                             f"server speaks protocol {PROTOCOL_VERSION}")
        await self._send_layout()
        while True:
            msg = await self._next()
            kind = msg["type"]
            if kind == "gaze":
                await self._error("out-of-phase", "gaze outside a running trial")
            elif kind == "ack":
                await self._error("out-of-phase", "no decision awaiting an ack")
            elif kind == "start_session":
                await self._run_session()
            else:
                raise _Violation("unexpected-type", f"cannot handle {kind!r} now")

    async def _send_layout(self) -> None:
        layout = self.cfg.layout
        await self._send({
            "type": "layout",
            "screen_w": layout.screen_w,
            "screen_h": layout.screen_h,
            "n_trials": self.cfg.trials,
            "aois": [
                {"id": a.id, "word": a.word, "x": a.x, "y": a.y, "w": a.w, "h": a.h}
                for a in layout.aois
            ],
        })

    async def _run_session(self) -> None:
        cfg = self.cfg
        layout = cfg.layout
        k = layout.n_aois
        dim = cfg.model.n_dims
        u = unit_direction(dim)
        rng = np.random.default_rng(cfg.seed)
        bundles: List[TrialBundle] = []
        targets: dict = {}
        self.state = LiveSessionState()
        try:
            for trial in range(1, cfg.trials + 1):
                target = ((trial - 1) % k) + 1
                order = make_sequence(k, cfg.repetitions, rng)
                rows = np.empty((len(order), dim), dtype=np.float64)
                for i, aoi_id in enumerate(order):
                    sign = 1.0 if aoi_id == target else -1.0
                    rows[i] = sign * (cfg.eeg_separation / 2.0) * u \
                        + rng.standard_normal(dim)

                self.state.start_trial(trial)
                start_us = self.clock.stamp()
                await self.transport.send(json.dumps({
                    "type": "trial_start", "t_us": start_us, "trial": trial,
                    "target_word": layout.aoi_by_id(target).word,
                }))
                events = []
                for aoi_id in order:
                    t = self.clock.stamp()
                    await self.transport.send(json.dumps({
                        "type": "flash", "t_us": t, "aoi_id": aoi_id,
                        "duration_ms": cfg.flash_ms,
                    }))
                    events.append(StimulusEvent(t_us=t, trial=trial, aoi_id=aoi_id,
                                                is_target=aoi_id == target))
                    await self._sleep_processing(cfg.soa_s)
                self.state.phase = "deciding"
                end_us = self.clock.stamp()
                await self.transport.send(json.dumps({
                    "type": "trial_end", "t_us": end_us, "trial": trial,
                }))

                try:
                    bundle = TrialBundle(
                        trial=trial, window_us=(start_us, end_us),
                        gaze=tuple(self.state.gaze_buffer),
                        events=tuple(events), features=rows, target_aoi=target)
                    decision = classify_trial(bundle, cfg.model, layout, cfg.fusion)
                except EmptyTrialError:
                    await self._error("empty-trial",
                                      f"trial {trial} received no usable gaze; discarded")
                else:
                    self.state.record_decision(trial)
                    bundles.append(bundle)
                    targets[trial] = target
                    chosen = decision.chosen_aoi
                    await self._send({
                        "type": "decision", "trial": trial,
                        "aoi_id": chosen,
                        "word": layout.aoi_by_id(chosen).word if chosen else None,
                        "mode": decision.mode,
                        "c_et": [float(v) for v in decision.c_et],
                        "c_eeg": [float(v) for v in decision.c_eeg],
                    })
                await self._await_ack()
        except _Disconnect:
            # Mid-trial data is discarded; completed trials are still saved.
            self._persist(bundles, targets)
            raise
        self._persist(bundles, targets)
        self.state.phase = "idle"

    def _persist(self, bundles: List[TrialBundle], targets: dict) -> None:
        if not bundles:
            return
        path = self.server.next_record_dir()
        gaze = [s for b in bundles for s in b.gaze]
        manifest = SessionManifest(
            session_id=path.name,
            subject="live",
            screen_w=self.cfg.layout.screen_w,
            screen_h=self.cfg.layout.screen_h,
            gaze_rate_hz=self.cfg.gaze_rate_hz,
            eeg_rate_hz=self.cfg.eeg_rate_hz,
            feature_dim=self.cfg.model.n_dims,
            trial_windows=tuple((b.trial, b.window_us[0], b.window_us[1])
                                for b in bundles),
            targets=targets,
        )
        save_session(Session(manifest=manifest, layout=self.cfg.layout,
                             gaze=tuple(gaze), bundles=tuple(bundles)), path)
        self.server.saved_sessions.append(path)
        print(f"session saved: {path}", flush=True)

    async def _sleep_processing(self, seconds: float) -> None:
        """Sleep while still draining inbound messages (gaze accumulation)."""
        loop = asyncio.get_running_loop()
        deadline = loop.time() + seconds
        while True:
            remaining = deadline - loop.time()
            if remaining <= 0:
                return
            try:
                msg = await asyncio.wait_for(self.inbox.get(), timeout=remaining)
            except asyncio.TimeoutError:
                return
            if msg is None:
                raise _Disconnect("client left mid-trial")
            if not isinstance(msg, dict) or "_malformed" in msg or "type" not in msg:
                raise _Violation("malformed", "messages must be JSON objects with a type")
            await self._handle_in_trial(msg)

    async def _handle_in_trial(self, msg: dict) -> None:
        kind = msg["type"]
        if kind == "gaze":
            self._accept_gaze(msg)
        elif kind == "ack":
            await self._error("out-of-phase", "ack during a running trial")
        else:
            raise _Violation("unexpected-type", f"cannot handle {kind!r} mid-trial")

    def _accept_gaze(self, msg: dict) -> None:
        x, y = msg.get("x_px"), msg.get("y_px")
        pupil = msg.get("pupil_mm")
        t = self.clock.stamp()
        point = None
        if x is not None and y is not None:
            try:
                point = (float(x), float(y))
            except (TypeError, ValueError):
                point = None
        try:
            sample = GazeSample(
                t_us=t, left=point,
                pupil_left=float(pupil) if pupil is not None else None)
        except (TypeError, ValueError):
            return  # bad values: drop the sample, not the connection
        self.state.gaze_buffer.append(sample)

    async def _await_ack(self) -> None:
        """Block in the deciding phase until the client acknowledges."""
        while True:
            msg = await self.inbox.get()
            if msg is None:
                raise _Disconnect("client left while deciding")
            if not isinstance(msg, dict) or "_malformed" in msg or "type" not in msg:
                raise _Violation("malformed", "messages must be JSON objects with a type")
            kind = msg["type"]
            if kind == "ack":
                return
            if kind == "gaze":
                await self._error("out-of-phase", "gaze outside a running trial")
            else:
                raise _Violation("unexpected-type", f"cannot handle {kind!r} while deciding")


async def serve(cfg: ServeConfig, host: str = "127.0.0.1", port: int = 0,
                once: bool = False) -> None:
    """Start the service and run until the first client leaves (once) or forever."""
    server = LiveServer(cfg, host=host, port=port, once=once)
    bound_host, bound_port = await server.start()
    print(f"listening on {bound_host}:{bound_port}", flush=True)
    await server.serve_until_done()
