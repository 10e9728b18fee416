"""Acceptance gate: end-to-end checks over the whole package.

Each test covers one headline guarantee and prints a single
``[acceptance] <label>: PASS/FAIL`` verdict line (shown under pytest's
``-rP`` summary) with the measured numbers behind the decision.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from agora.cli import run
from agora.core import Action, ActionKind, ResourceStructure
from agora.engine import EngineConfig, Room
from agora.errors import CorruptLog
from agora.matrix import (
    ACTION_SLICE,
    ATMOSPHERE_SLICE,
    COUNT_INDEX,
    FEATURE_DIM,
    PROPORTION_INDEX,
    assemble_features,
    make_matrix,
)
from agora.persistence import RoomLog, persist_room, restore_room
from agora.sentiment import SentimentScore, atmosphere_value
from agora.simulator import generate_dataset, load_scenario, run_scenario
from agora.training import TrainConfig, train
from agora.transformer import (
    desk_config,
    gradient_check,
    init_weights,
    parameter_shapes,
    tiny_config,
)


@contextmanager
def _verdict(label: str):
    info = {"detail": ""}
    try:
        yield info
    except BaseException:
        print(f"[acceptance] {label}: FAIL")
        raise
    suffix = f" ({info['detail']})" if info["detail"] else ""
    print(f"[acceptance] {label}: PASS{suffix}")


class TestAtmosphereFormula:
    def test_bounds_and_hand_values(self):
        with _verdict("atmosphere formula") as info:
            rng = np.random.Generator(np.random.PCG64(7))
            triples = rng.uniform(0.0, 1.0, size=(10_000, 3))
            started = time.perf_counter()
            values = [atmosphere_value(SentimentScore(p, n, c)) for p, n, c in triples]
            elapsed = time.perf_counter() - started
            assert all(-1.0 <= v <= 1.0 for v in values)
            assert atmosphere_value(SentimentScore(1.0, 0.0, 1.0)) == 1.0
            for p, c in rng.uniform(0.0, 1.0, size=(100, 2)):
                assert atmosphere_value(SentimentScore(p, p, c)) == 0.0
            assert abs(atmosphere_value(SentimentScore(0.8, 0.1, 0.5)) - 0.35) <= 1e-12
            assert elapsed < 1.0
            info["detail"] = f"10000 samples in {elapsed:.3f}s, hand case within 1e-12"


class TestFeatureLayout:
    def test_sentinel_audit_of_every_region(self):
        with _verdict("feature vector layout") as info:
            assert FEATURE_DIM == 1036 == 1024 + 2 + 10
            action_vec = np.arange(1.0, 1025.0)
            window = [round(0.1 * k - 0.45, 3) for k in range(10)]
            out = assemble_features(
                action_vec, ResourceStructure(count=7.25, proportion=0.375), window
            )
            assert out.shape == (1036,)
            assert np.array_equal(out[ACTION_SLICE], action_vec)
            assert out[COUNT_INDEX] == 7.25
            assert out[PROPORTION_INDEX] == 0.375
            assert np.array_equal(out[ATMOSPHERE_SLICE], np.array(window))
            regions = [out[ACTION_SLICE], out[[COUNT_INDEX, PROPORTION_INDEX]], out[ATMOSPHERE_SLICE]]
            assert sum(r.size for r in regions) == 1036
            info["detail"] = "1036 = 1024 action + 2 resource + 10 atmosphere, all sentinels placed"


class TestGradientCheck:
    def test_every_tensor_matches_central_differences(self):
        with _verdict("gradient check") as info:
            started = time.perf_counter()
            result = gradient_check(eps=1e-4, seed=0)
            elapsed = time.perf_counter() - started
            expected_names = {name for name, _ in parameter_shapes(tiny_config())}
            assert set(result["per_tensor"]) == expected_names
            assert result["max_rel_err"] < 1e-3
            assert elapsed < 60.0
            info["detail"] = (
                f"{len(expected_names)} tensors, max rel err "
                f"{result['max_rel_err']:.3e} in {elapsed:.1f}s"
            )


class TestTrainingBehavior:
    def test_learned_model_beats_baselines_and_stops_early(self):
        with _verdict("training on synthetic labels") as info:
            cfg = load_scenario("mixed-heuristic")
            oracle = make_matrix({"kind": "heuristic", **cfg.heuristic})
            started = time.perf_counter()
            dataset = generate_dataset(cfg, oracle, 2000, seq_len=16)
            labels = np.array([sample.label for sample in dataset])
            weights = init_weights(desk_config(), seed=0)
            best, history = train(weights, TrainConfig(), dataset)
            elapsed = time.perf_counter() - started

            initial_test = history.test_mse[0]
            final_test = history.test_mse[history.best_epoch]
            assert final_test < 0.5 * initial_test
            assert final_test < float(np.var(labels))
            assert history.epochs_run - history.best_epoch <= 10
            if history.epochs_run < TrainConfig().max_epochs:
                assert history.epochs_run - history.best_epoch == 10
            assert elapsed < 600.0
            info["detail"] = (
                f"test MSE {initial_test:.4f} -> {final_test:.6f} "
                f"(label variance {np.var(labels):.4f}), best epoch "
                f"{history.best_epoch}/{history.epochs_run}, {elapsed:.0f}s"
            )


def _fuzz_action(rng, members, own_messages, banned="thorn"):
    roll = rng.random()
    actor = members[int(rng.integers(len(members)))]
    if roll < 0.02:
        return Action(kind=ActionKind.SPEAK, actor="ghost", text="lurking outside")
    if roll < 0.55:
        words = ["great", "terrible", "steady", "progress", "noise"]
        text = " ".join(rng.choice(words, size=3))
        if rng.random() < 0.08:
            text += f" {banned}"
        return Action(kind=ActionKind.SPEAK, actor=actor, text=text)
    if roll < 0.70:
        if own_messages and rng.random() < 0.8:
            message_id = own_messages[int(rng.integers(len(own_messages)))][1]
        else:
            message_id = "m999999"
        return Action(kind=ActionKind.WITHDRAW, actor=actor, message_id=message_id)
    if roll < 0.82:
        return Action(kind=ActionKind.ISSUE_TASK, actor=actor, description="sort the queue")
    candidate = members[int(rng.integers(len(members)))] if rng.random() < 0.9 else "ghost"
    return Action(kind=ActionKind.VOTE, actor=actor, candidate=candidate)


class TestEngineInvariants:
    def test_fuzzed_action_streams_hold_invariants_and_replay(self, tmp_path):
        with _verdict("engine fuzzing and replay") as info:
            members = ["ann", "bob", "cid", "dee"]
            total_actions = rejected = 0
            started = time.perf_counter()
            for seed in range(10):
                rng = np.random.Generator(np.random.PCG64(1000 + seed))
                room = Room(
                    f"fuzz{seed}",
                    members,
                    topic="fuzzing",
                    config=EngineConfig(history_len=4),
                    matrix=make_matrix(
                        {"kind": "rule", "banned_tokens": ["thorn"], "mute_duration_ticks": 6}
                    ),
                )
                log_path = tmp_path / f"fuzz{seed}.log"
                log = persist_room(room, log_path)
                own_messages = []
                cap = room.config.budget_cap
                for _ in range(1000):
                    if rng.random() < 0.4:
                        ticks = int(rng.integers(1, 3))
                        room.advance_time(ticks)
                        log.append_ticks(ticks)
                    action = _fuzz_action(rng, members, own_messages)
                    pre_hash = room.state_hash()
                    outcome = room.submit_action(action)
                    total_actions += 1
                    if outcome.accepted:
                        post_hash = room.state_hash()
                        log.append_action(action, outcome, post_hash)
                        if action.kind is ActionKind.SPEAK:
                            own_messages.append((action.actor, outcome.message_id))
                    else:
                        rejected += 1
                        assert room.state_hash() == pre_hash
                    for member, row in room.ledger.members.items():
                        assert 0.0 <= row.budget <= cap, (seed, member, row.budget)
                        assert row.vote_tokens >= 0
                restored = restore_room(log_path)
                assert restored.state_hash() == room.state_hash()
            elapsed = time.perf_counter() - started
            assert total_actions == 10_000
            assert rejected > 0
            info["detail"] = (
                f"10 seeds x 1000 actions, {rejected} rejections all hash-stable, "
                f"10/10 logs replayed to equal hashes, {elapsed:.0f}s"
            )


class TestRegimeOrdering:
    def test_allocator_beats_blanket_control_across_seeds(self):
        with _verdict("regime ordering over 10 seeds") as info:
            scenarios = {
                name: load_scenario(name)
                for name in ("mixed-heuristic", "mixed-high-control", "mixed-low-control")
            }
            atmosphere_wins = mute_order_wins = 0
            for seed in range(10):
                reports = {
                    name: run_scenario(replace(cfg, seed=seed))
                    for name, cfg in scenarios.items()
                }
                heur = reports["mixed-heuristic"]
                high = reports["mixed-high-control"]
                low = reports["mixed-low-control"]
                if heur.mean_atmosphere > high.mean_atmosphere:
                    atmosphere_wins += 1
                if (
                    high.mute_event_rate > heur.mute_event_rate > low.mute_event_rate
                    and low.mute_event_rate == 0.0
                ):
                    mute_order_wins += 1
            assert atmosphere_wins >= 8, atmosphere_wins
            assert mute_order_wins >= 8, mute_order_wins
            info["detail"] = (
                f"atmosphere ordering {atmosphere_wins}/10, "
                f"mute-rate ordering {mute_order_wins}/10"
            )


class TestTaskThroughput:
    def test_tasks_complete_under_throttling_in_every_seed(self):
        with _verdict("task completion under throttling") as info:
            cfg = load_scenario("tasks")
            completed = [
                run_scenario(replace(cfg, seed=seed)).tasks_completed for seed in range(10)
            ]
            assert all(count >= 1 for count in completed), completed
            info["detail"] = f"completed per seed: {completed}"


class TestCliDeterminism:
    def test_fixed_seeds_give_byte_identical_artifacts(self, tmp_path, capsys):
        with _verdict("seeded CLI runs are byte-identical") as info:
            scenario = tmp_path / "det.json"
            scenario.write_text(
                json.dumps(
                    {
                        "name": "det",
                        "regime": "low_control",
                        "roster": {"cooperative": 2},
                        "ticks": 150,
                        "seed": 0,
                    }
                ),
                encoding="utf-8",
            )
            pairs = []
            for arm in ("a", "b"):
                sim_out = tmp_path / arm / "sim"
                data_out = tmp_path / arm / "data"
                model_out = tmp_path / arm / "model"
                assert run(["simulate", str(scenario), "--out", str(sim_out)]) == 0
                assert run(["gen-data", str(scenario), "-n", "40", "--seq-len", "4",
                            "--out", str(data_out)]) == 0
                dataset = data_out / "det-heuristic-n40.ds"
                assert run(["train", str(dataset), "--epochs", "2",
                            "--out", str(model_out)]) == 0
                pairs.append(
                    [
                        sim_out / "det-seed0-report.json",
                        dataset,
                        model_out / "model.agw",
                        model_out / "history.json",
                    ]
                )
            capsys.readouterr()
            for first, second in zip(*pairs):
                assert first.read_bytes() == second.read_bytes(), first.name
            info["detail"] = "simulate, gen-data and train artifacts identical across two runs"


class TestPersistenceRoundTrip:
    def test_restore_matches_and_tampering_is_detected(self, tmp_path):
        with _verdict("persistence round trip and tamper detection") as info:
            room = Room("keep", ["ann", "bob"], topic="retention", matrix=make_matrix({"kind": "noop"}))
            log = persist_room(room, tmp_path / "keep.log")
            for text in ("great start", "tamper-target", "steady progress"):
                room.advance_time(2)
                log.append_ticks(2)
                action = Action(kind=ActionKind.SPEAK, actor="ann", text=text)
                outcome = room.submit_action(action)
                assert outcome.accepted
                log.append_action(action, outcome, room.state_hash())
            restored = restore_room(tmp_path / "keep.log")
            assert restored.state_hash() == room.state_hash()

            tampered = tmp_path / "tampered.log"
            tampered.write_text(
                (tmp_path / "keep.log").read_text("utf-8").replace("tamper-target", "rewritten line"),
                encoding="utf-8",
            )
            with pytest.raises(CorruptLog):
                restore_room(tampered)
            info["detail"] = "restored hash equal; edited record rejected"
