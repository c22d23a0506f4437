"""Tests for the guessing-game referee and its communication modes."""
import pytest

from src.core.crcore import RCSProtocol, mock_backend
from src.core.guessing_game import (
    CommGuard, GuessingGameConfig, play_guessing_game, run_guessing_game,
)
from src.models.errors import CommModeViolation
from src.models.protocol import RCSBackendConfig
from src.models.spacetime import SpacetimeMessage


def _msg(sender, receiver, t_send):
    distance = 2.0 if {sender, receiver} == {"P", "Q"} else 1.0
    return SpacetimeMessage(sender=sender, receiver=receiver, t_send=t_send, t_arrive=t_send + distance)


class TestCommGuard:
    def test_none_blocks_the_pair(self):
        guard = CommGuard("none", 5.0)
        guard(_msg("V", "P", 0.0))
        with pytest.raises(CommModeViolation):
            guard(_msg("P", "Q", 1.0))

    def test_free_allows_everything(self):
        guard = CommGuard("free", 5.0)
        for t in (1.0, 1.5, 2.0):
            guard(_msg("P", "Q", t))
            guard(_msg("Q", "P", t))

    def test_simultaneous_exchange(self):
        guard = CommGuard("simultaneous-one-round", 5.0)
        guard(_msg("P", "Q", 1.0))
        guard(_msg("Q", "P", 1.0))
        guard(_msg("P", "Q", 6.0))

    def test_one_message_per_window(self):
        guard = CommGuard("simultaneous-one-round", 5.0)
        guard(_msg("P", "Q", 1.0))
        with pytest.raises(CommModeViolation):
            guard(_msg("P", "Q", 2.0))

    def test_replies_are_not_simultaneous(self):
        guard = CommGuard("simultaneous-one-round", 5.0)
        guard(_msg("P", "Q", 1.0))
        with pytest.raises(CommModeViolation):
            guard(_msg("Q", "P", 3.0))

    def test_window_boundaries(self):
        guard = CommGuard("simultaneous-one-round", 5.0)
        assert [guard.window(t) for t in (1.0, 5.9, 6.0, 11.0)] == [0, 0, 1, 2]


class TestPlay:
    def test_deterministic_prover_is_always_guessed(self):
        cfg = GuessingGameConfig(spec=mock_backend("deterministic-answer", rounds=3))
        assert run_guessing_game(cfg, trials=20) == 1.0

    def test_coin_flip_is_a_coin_flip(self):
        cfg = GuessingGameConfig(spec=mock_backend("coin-flip", rounds=1, answer_bits=1), guesser="uniform")
        assert 0.38 < run_guessing_game(cfg, trials=400) < 0.62

    def test_no_pair_traffic_without_communication(self):
        cfg = GuessingGameConfig(spec=mock_backend("coin-flip", rounds=3), guesser="echo")
        outcome = play_guessing_game(cfg, seed=1)
        assert not [e for e in outcome.log if {e.sender, e.receiver} == {"P", "Q"}]
        assert len(outcome.matches) == 3

    def test_echo_breaks_the_silence_rule(self):
        cfg = GuessingGameConfig(spec=mock_backend("coin-flip", rounds=2), prover="honest-echo")
        with pytest.raises(CommModeViolation):
            play_guessing_game(cfg, seed=0)

    def test_echo_fits_one_simultaneous_round(self):
        cfg = GuessingGameConfig(spec=mock_backend("coin-flip", rounds=3), prover="honest-echo",
                                 guesser="echo", comm_mode="simultaneous-one-round")
        outcome = play_guessing_game(cfg, seed=0)
        assert len(outcome.log.filter(kind="echo")) == 3
        assert outcome.accept

    def test_answers_are_committed_on_arrival(self):
        cfg = GuessingGameConfig(spec=mock_backend("deterministic-answer", rounds=2), period=4.0)
        outcome = play_guessing_game(cfg, seed=3)
        arrivals = sorted(e.t for e in outcome.log.filter(receiver="V"))
        assert arrivals == [2.0, 2.0, 6.0, 6.0]
        assert outcome.win

    @pytest.mark.slow
    def test_rcs_samples_are_hard_to_guess(self):
        spec = RCSProtocol(RCSBackendConfig(n_qubits=3, depth=8, k=1), rounds=2)
        cfg = GuessingGameConfig(spec=spec, seed=5)
        assert run_guessing_game(cfg, trials=50) < 0.3

    @pytest.mark.slow
    def test_single_samples_of_eight_qubits_are_not_guessed(self):
        spec = RCSProtocol(RCSBackendConfig(n_qubits=8, depth=12, k=1), rounds=4)
        cfg = GuessingGameConfig(spec=spec, seed=9)
        assert run_guessing_game(cfg, trials=1000) <= 0.01
        matches = [m for s in range(250) for m in play_guessing_game(cfg, seed=s).matches]
        assert len(matches) == 1000
        assert sum(matches) / len(matches) <= 0.03

    def test_period_must_leave_room_for_a_round_trip(self):
        with pytest.raises(ValueError):
            GuessingGameConfig(spec=mock_backend("coin-flip"), period=3.0)

    def test_trials_must_be_positive(self):
        with pytest.raises(ValueError):
            run_guessing_game(GuessingGameConfig(spec=mock_backend("coin-flip")), trials=0)
