"""Transport runners: in-process channels and loopback stream sockets.

Each topology stage (parameter nodes, then the server) runs either inline
(deterministic logical mode), as a thread (wall mode, in-process), or as a
separate OS process speaking the binary wire protocol over loopback TCP.
The state machines themselves are transport-agnostic.
"""

from __future__ import annotations

import multiprocessing as mp
import queue
import socket
import threading
import time

from .messages import FrameReader, Measurement, Shutdown, send_message
from .nodes import NodeSpec, ParamNode, Server
from .wall import WallNode

__all__ = ["find_free_ports", "run_inproc_logical", "run_socket", "run_inproc_wall"]

_CONNECT_TIMEOUT = 15.0


def find_free_ports(count: int) -> list[int]:
    socks = []
    try:
        for _ in range(count):
            s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            s.bind(("127.0.0.1", 0))
            socks.append(s)
        return [s.getsockname()[1] for s in socks]
    finally:
        for s in socks:
            s.close()


def _listen(port: int) -> socket.socket:
    s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    deadline = time.monotonic() + _CONNECT_TIMEOUT
    while True:
        try:
            s.bind(("127.0.0.1", port))
            break
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)
    s.listen(1)
    return s


def _connect(port: int) -> socket.socket:
    deadline = time.monotonic() + _CONNECT_TIMEOUT
    while True:
        try:
            return socket.create_connection(("127.0.0.1", port), timeout=1.0)
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.02)


def _build_stage(config, topo, index: int):
    """index 1..L are parameter nodes, index L+1 the server."""
    problem = config.problem()
    if index <= topo.L:
        spec = NodeSpec(
            index=index,
            total=topo.L,
            alpha=topo.alpha_for(index),
            optimizer=topo.optimizer_for(index),
            eval_cost=topo.eval_cost,
            beta=topo.beta1 if index == 1 else None,
            theta_init=problem.prior.theta0.copy() if index == 1 else None,
        )
        return spec, problem
    return None, problem


def _source_messages(batch):
    for k in range(len(batch)):
        yield Measurement(k=k + 1, t=float(batch.t[k]), y=batch.y[k])
    yield Shutdown()


# ---------------------------------------------------------------------------
# in-process, logical clock: synchronous stage-by-stage dispatch

def run_inproc_logical(config, topo, batch):
    stages = []
    for index in range(1, topo.L + 1):
        spec, problem = _build_stage(config, topo, index)
        stages.append(ParamNode(spec, problem))
    _, problem = _build_stage(config, topo, topo.L + 1)
    server = Server(
        problem,
        problem.prior.theta0,
        topo.optimizer,
        num_nodes=topo.L,
        eval_cost=topo.eval_cost,
        keep_states=topo.keep_server_states,
        timing=topo.timing,
    )
    all_stages = stages + [server]
    for msg in _source_messages(batch):
        current = [msg]
        for stage in all_stages:
            nxt = []
            for m in current:
                nxt.extend(stage.handle(m))
            current = nxt
    return [node.reports for node in stages], server.report(), None


# ---------------------------------------------------------------------------
# processes over loopback sockets (logical or wall timing)

def _stage_main(config, topo, index, listen_port, next_port, result_q):
    try:
        _stage_loop(config, topo, index, listen_port, next_port, result_q)
    except Exception as exc:  # surfaced by the orchestrator as a diagnostic
        result_q.put(("error", index, f"{type(exc).__name__}: {exc}"))


def _stage_loop(config, topo, index, listen_port, next_port, result_q):
    spec, problem = _build_stage(config, topo, index)
    lsock = _listen(listen_port)
    conn, _ = lsock.accept()
    out = _connect(next_port) if next_port is not None else None
    reader = FrameReader(conn)
    send_lock = threading.Lock()

    def send(msg):
        if out is not None:
            if topo.hop_delay > 0 and topo.timing == "wall":
                time.sleep(topo.hop_delay)
            with send_lock:
                send_message(out, msg)

    try:
        if index <= topo.L:
            if topo.timing == "logical":
                node = ParamNode(spec, problem)
                while True:
                    msg = reader.read()
                    for m in node.handle(msg):
                        send(m)
                    if isinstance(msg, Shutdown):
                        break
                result_q.put(("node", index, node.reports))
            else:
                node = WallNode(spec, problem)
                node.run(reader.read, send)
                result_q.put(("node", index, node.reports))
        else:
            server = Server(
                problem,
                problem.prior.theta0,
                topo.optimizer,
                num_nodes=topo.L,
                eval_cost=topo.eval_cost,
                keep_states=topo.keep_server_states,
                timing=topo.timing,
            )
            while True:
                msg = reader.read()
                server.handle(msg)
                if isinstance(msg, Shutdown):
                    break
            result_q.put(("server", index, server.report()))
    finally:
        conn.close()
        lsock.close()
        if out is not None:
            out.close()


def run_socket(config, topo, batch):
    ports = topo.ports or find_free_ports(topo.L + 1)
    if len(ports) != topo.L + 1:
        raise ValueError("need one port per stage (L nodes + server)")
    method = "fork" if "fork" in mp.get_all_start_methods() else "spawn"
    ctx = mp.get_context(method)
    result_q = ctx.Queue()
    procs = []
    for i, index in enumerate(range(1, topo.L + 2)):
        next_port = ports[i + 1] if i + 1 < len(ports) else None
        p = ctx.Process(
            target=_stage_main,
            args=(config, topo, index, ports[i], next_port, result_q),
        )
        p.start()
        procs.append(p)
    out = _connect(ports[0])
    t_first_wall = None
    start = time.monotonic()
    try:
        for msg in _source_messages(batch):
            if topo.timing == "wall" and isinstance(msg, Measurement):
                target = start + topo.pace_scale * (msg.t - batch.t[0])
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            if t_first_wall is None and isinstance(msg, Measurement):
                t_first_wall = time.monotonic()
            send_message(out, msg)
        results = {}
        for _ in range(len(procs)):
            kind, index, payload = result_q.get(timeout=120)
            if kind == "error":
                raise RuntimeError(f"pipeline stage {index} failed: {payload}")
            results[index] = (kind, payload)
        for p in procs:
            p.join(timeout=30)
    finally:
        out.close()
        for p in procs:
            if p.is_alive():
                p.terminate()
    node_reports = [results[i][1] for i in range(1, topo.L + 1)]
    server_report = results[topo.L + 1][1]
    return node_reports, server_report, t_first_wall


# ---------------------------------------------------------------------------
# in-process threads (wall timing)

def run_inproc_wall(config, topo, batch):
    queues = [queue.Queue() for _ in range(topo.L + 1)]
    nodes = []
    threads = []
    for i, index in enumerate(range(1, topo.L + 1)):
        spec, problem = _build_stage(config, topo, index)
        node = WallNode(spec, problem)
        nodes.append(node)

        def make_send(q):
            def send(msg):
                if topo.hop_delay > 0:
                    time.sleep(topo.hop_delay)
                q.put(msg)
            return send

        th = threading.Thread(
            target=node.run, args=(queues[i].get, make_send(queues[i + 1])), daemon=True
        )
        threads.append(th)
    _, problem = _build_stage(config, topo, topo.L + 1)
    server = Server(
        problem,
        problem.prior.theta0,
        topo.optimizer,
        num_nodes=topo.L,
        eval_cost=topo.eval_cost,
        keep_states=topo.keep_server_states,
        timing=topo.timing,
    )

    def server_loop():
        while True:
            msg = queues[-1].get()
            server.handle(msg)
            if isinstance(msg, Shutdown):
                return

    server_thread = threading.Thread(target=server_loop, daemon=True)
    for th in threads:
        th.start()
    server_thread.start()
    start = time.monotonic()
    t_first_wall = None
    for msg in _source_messages(batch):
        if isinstance(msg, Measurement):
            target = start + topo.pace_scale * (msg.t - batch.t[0])
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            if t_first_wall is None:
                t_first_wall = time.monotonic()
        queues[0].put(msg)
    for th in threads:
        th.join()
    server_thread.join()
    return [node.reports for node in nodes], server.report(), t_first_wall
