#!/usr/bin/env python3
"""Writes paper_replication.json: 20 rooms behind two secure routers, one
open campus router between them and the control server, six arms."""

import json
import pathlib

SERVER, CAMPUS, SR_EAST, SR_WEST = 1, 2, 3, 4

# room id -> script; default is vacant at a steady 22 C
OCCUPIED = {102, 105, 201, 207}
LEAVES_AT_15S = {104, 204}
HEATING = 110


def script(room):
    if room == HEATING:
        return [
            {"t_ms": 0, "motion": False, "temp": 22.0, "humidity": 40},
            {"t_ms": 20000, "motion": False, "temp": 30.0, "humidity": 35},
            {"t_ms": 40000, "motion": False, "temp": 55.0, "humidity": 20},
            {"t_ms": 50000, "motion": False, "temp": 45.0, "humidity": 25},
        ]
    if room in OCCUPIED:
        return [
            {"t_ms": 0, "motion": True, "temp": 23.5, "humidity": 45},
            {"t_ms": 60000, "motion": True, "temp": 24.5, "humidity": 48},
        ]
    if room in LEAVES_AT_15S:
        return [
            {"t_ms": 0, "motion": True, "temp": 22.8, "humidity": 42},
            {"t_ms": 15000, "motion": False, "temp": 22.8, "humidity": 42},
        ]
    return [
        {"t_ms": 0, "motion": False, "temp": 21.0 + (room % 10) / 10, "humidity": 38 + room % 7},
        {"t_ms": 60000, "motion": False, "temp": 20.5 + (room % 10) / 10, "humidity": 36 + room % 7},
    ]


def main():
    nodes = [
        {"id": SERVER, "name": "control-server", "role": "server"},
        {"id": CAMPUS, "name": "campus-router", "role": "router", "tappable": True},
        {"id": SR_EAST, "name": "sr-east", "role": "secure_router"},
        {"id": SR_WEST, "name": "sr-west", "role": "secure_router"},
    ]
    links = [
        {"name": "uplink", "a": CAMPUS, "b": SERVER, "loss": 0.0, "latency_ms": 5},
        {"name": "east", "a": SR_EAST, "b": CAMPUS, "loss": 0.0, "latency_ms": 5},
        {"name": "west", "a": SR_WEST, "b": CAMPUS, "loss": 0.0, "latency_ms": 5},
    ]
    rooms = []
    node_id = 5
    for gateway, base in ((SR_EAST, 100), (SR_WEST, 200)):
        for i in range(1, 11):
            room = base + i
            nodes.append({"id": node_id, "name": f"room-{room}", "role": "room"})
            links.append({"name": f"lan-{room}", "a": node_id, "b": gateway, "loss": 0.0, "latency_ms": 1})
            rooms.append({
                "room_id": room,
                "node": node_id,
                "gateway": gateway,
                "session_id": room,
                "device_port": 5000 + room,
                "appliance_on": room % 3 != 0,
                "locked": False,
                "script": script(room),
            })
            node_id += 1

    commands = [
        {"at_ms": 5000, "room_id": 102, "opcode": "LOCK"},
        {"at_ms": 6000, "room_id": 103, "opcode": "LOCK"},
        {"at_ms": 8000, "room_id": 103, "opcode": "UNLOCK"},
        {"at_ms": 12000, "room_id": 201, "opcode": "LOCK"},
    ]
    # an operator walking both wings switching appliances off and on
    for k, room in enumerate(list(range(101, 111)) + list(range(201, 211))):
        commands.append({"at_ms": 16000 + 500 * k, "room_id": room, "opcode": "APPLIANCE_OFF"})
        commands.append({"at_ms": 40000 + 500 * k, "room_id": room, "opcode": "APPLIANCE_ON"})
    commands.append({"at_ms": 52000, "room_id": 205, "opcode": "BUZZER_ON"})
    commands.append({"at_ms": 54000, "room_id": 205, "opcode": "BUZZER_OFF"})

    passive = {"mode": "passive"}
    mitm = {"mode": "mitm", "every_nth": 10, "xor_mask": 1}
    arms = []
    for variant, label in (("NONE", "none"), ("L2TP_LITE", "l2tp"), ("PPTP_LITE", "pptp")):
        arms.append({"name": f"{label}-passive", "variant": variant, "adversary": passive})
        arms.append({"name": f"{label}-mitm", "variant": variant, "adversary": mitm})

    doc = {
        "name": "paper_replication",
        "seed": 20240601,
        "duration_s": 60,
        "drain_ms": 5000,
        "start_time": "17:59:30",
        "rules": {"fire_threshold": 50.0, "end_of_day": "18:00:00"},
        "device": {"vacancy_debounce_ms": 30000},
        "tunnel": {
            "secret": "7f3c2a9e51d04b86a1e9c3f27d5b08e46c1a9f3e2b7d5c08a4f61e92b3d7c05a",
            "mtu": 1400,
            "rto_ms": 1000,
            "max_retransmits": 5,
            "hello_interval_ms": 10000,
        },
        "topology": {"nodes": nodes, "links": links},
        "rooms": rooms,
        "commands": commands,
        "arms": arms,
    }
    out = pathlib.Path(__file__).with_name("paper_replication.json")
    out.write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
