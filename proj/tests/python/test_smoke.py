import math

import pytest

import playcall as pc


def two_state():
    spec = pc.ModelSpec(2, [])
    params = pc.HmmParams(spec, delta=[0.5, 0.5], pass_prob=[0.2, 0.8], coefficients=[-2.0, -2.0])
    return spec, params


def test_first_play_forecast_uses_initial_distribution():
    spec, params = two_state()
    f = pc.forecast_first(spec, params)
    assert f.pass_prob == pytest.approx(0.5, abs=1e-12)
    assert f.predicted_call == 1
    assert f.n_history == 0


def test_forecast_after_history_matches_hand_value():
    spec, params = two_state()
    # gamma = softmax([0, -2]) per row; filtered after one pass = (0.2, 0.8).
    stay = 1.0 / (1.0 + math.exp(-2.0))
    history = pc.PlaySequence([pc.Play(1)])
    f = pc.forecast_next(spec, params, history)
    p2 = 0.2 * stay + 0.8 * (1 - stay)
    expected = p2 * 0.2 + (1 - p2) * 0.8
    assert f.pass_prob == pytest.approx(expected, abs=1e-12)
    assert f.filtered_state_probs == pytest.approx([0.2, 0.8], abs=1e-12)


def test_single_play_likelihood():
    spec, params = two_state()
    seq = pc.PlaySequence([pc.Play(0)])
    assert pc.sequence_log_likelihood(spec, params, seq) == pytest.approx(math.log(0.5), abs=1e-12)


def test_dimension_errors_raise():
    spec = pc.ModelSpec(2, ["a"])
    with pytest.raises(pc.DimensionError):
        pc.HmmParams(spec, [0.5, 0.5], [0.2, 0.8], [0.0, 0.0])
    with pytest.raises(ValueError):
        pc.ModelSpec(1, [])


def test_fit_recovers_simulated_emissions_and_round_trips():
    spec = pc.ModelSpec(2, [])
    truth = pc.HmmParams(spec, [0.5, 0.5], [0.3, 0.85], [-2.2, -1.73])
    data = pc.simulate(spec, truth, 60, 200, 5)
    model = pc.fit(spec, data, n_starts=2, seed=3)
    assert model.converged
    assert model.params.pass_prob[0] == pytest.approx(0.3, abs=0.05)
    assert model.params.pass_prob[1] == pytest.approx(0.85, abs=0.05)
    assert model.n_params == pc.n_model_params(spec) == 5
    assert model.aic == pytest.approx(-2 * model.log_likelihood + 10)
    back = pc.FittedModel.from_json(model.to_json())
    assert back.params.coefficients == model.params.coefficients
    assert back.log_likelihood == model.log_likelihood


SITUATION = {
    "down": 3,
    "ydstogo": 7,
    "shotgun": True,
    "no_huddle": False,
    "own_score": 7,
    "opponent_score": 10,
    "goal_to_go": False,
    "yardline_100": 45,
}


def test_forecast_service_session_flow():
    spec, params = two_state()
    model = pc.fit(spec, pc.simulate(spec, params, 20, 50, 2), n_starts=1)
    model.team = "KC"
    svc = pc.ForecastService({"KC": model}, threshold=0.7)
    assert svc.health()[0] == 200

    status, body = svc.create_session({"team": "KC", "home": True})
    assert status == 201, body
    sid = body["session_id"]
    status, first = svc.forecast(sid, SITUATION)
    assert status == 200, first
    assert first["pass_prob"] == pytest.approx(pc.forecast_first(model.spec, model.params).pass_prob, abs=1e-12)

    status, body = svc.record_play(sid, dict(SITUATION, actual_call="pass"))
    assert status in (200, 201), body
    status, second = svc.forecast(sid, SITUATION)
    expected = pc.forecast_next(model.spec, model.params, pc.PlaySequence([pc.Play(1)]))
    assert second["pass_prob"] == pytest.approx(expected.pass_prob, abs=1e-12)
    assert second["n_history"] == 1

    status, body = svc.forecast(sid, {"down": 0})
    assert status == 422
    assert body["violations"]

    status, body = svc.create_session({"team": "ZZ", "home": True})
    assert status == 404
    assert "KC" in body["available_teams"]


HEADER = (
    "play_id,game_id,home_team,away_team,posteam,defteam,yardline_100,game_date,down,goal_to_go,ydstogo,"
    "desc,play_type,shotgun,no_huddle,posteam_score,defteam_score"
)


def write_league(path, seed):
    import random

    rng = random.Random(seed)
    lines = [HEADER]
    play_id = 0
    for season in (2016, 2017, 2018):
        for game in range(8):
            game_id = f"{season}09{10 + game:02d}00"
            date = f"{season}-09-{10 + game:02d}"
            for offense, defense in (("KC", "LAC"), ("LAC", "KC")):
                passing = rng.random() < 0.5
                lines.append(
                    f"{play_id},{game_id},KC,LAC,{offense},{defense},65,{date},NA,0,0,kickoff,kickoff,0,0,0,0"
                )
                play_id += 1
                for _ in range(40):
                    if rng.random() < 0.12:
                        passing = not passing
                    down = rng.randint(1, 4)
                    shotgun = int(rng.random() < 0.5)
                    call = "pass" if rng.random() < (0.8 if passing else 0.3) else "run"
                    lines.append(
                        f"{play_id},{game_id},KC,LAC,{offense},{defense},{rng.randint(20, 80)},{date},"
                        f"{down},0,{rng.randint(1, 12)},\"a, quoted\",{call},{shotgun},0,0,0"
                    )
                    play_id += 1
    path.write_text("\n".join(lines) + "\n")


def test_pipeline_from_csv_to_report(tmp_path):
    csv = tmp_path / "pbp.csv"
    write_league(csv, 4)
    summary = pc.ingest(str(csv), str(tmp_path / "store"), train_first=2016, train_last=2017, test=2018)
    assert summary["input_rows"] == summary["accepted"] + summary["rejected"] + summary["filtered"]
    assert summary["filtered"] == 48
    assert summary["test_sequences"] == 16

    names, train = pc.read_store(str(tmp_path / "store"), "train")
    assert names == pc.base_covariate_names()
    assert sorted(train) == ["KC", "LAC"]
    model = pc.fit_team("KC", train["KC"], names, select=True, n_starts=1, seed=2)
    assert model.team == "KC"

    _, test = pc.read_store(str(tmp_path / "store"), "test")
    report = pc.evaluate_team(model, names, test["KC"])
    assert report["team"] == "KC"
    assert report["n_plays"] == report["n_total"] == 8 * 40
    assert 0.0 <= report["accuracy"] <= 1.0
    gated = pc.evaluate_team(model, names, test["KC"], threshold=0.9)
    assert gated["n_plays"] <= report["n_plays"]
