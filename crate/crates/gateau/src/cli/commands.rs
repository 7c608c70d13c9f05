use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::config::{search_params, RunConfig};
use super::plot::{merged_csv, read_series, render_svg, Series};
use crate::chess::{parse_fen, GameRecord, Position, Variant};
use crate::elo::{
    export_match_pgn, fit_ratings_wls, run_matchmaking, MatchTable, RatingVector, Wdl,
};
use crate::graph::{edge_features_csv, encode_position, node_features_csv, MoveGraph};
use crate::mcts::play_game;
use crate::net::{load_checkpoint, run_gradcheck, Checkpoint, Evaluator};
use crate::selfplay::{frames_from_game, run_training, save_window, FrameWindow};

use super::CliError;

/// Writes a file atomically (temp + rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn cmd_train(
    config: &RunConfig,
    initial: Option<Checkpoint>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let resolved = super::config::render(config);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_atomic(&out_dir.join("run.conf"), &resolved)?;
    println!("resolved configuration:\n{resolved}");
    let cp = run_training(&config.train, initial, out_dir, |m| {
        println!(
            "iteration {:>4}: policy loss {:.4}, value loss {:.4}, {} games / {} plies in {:.1}s",
            m.iteration, m.policy_loss, m.value_loss, m.games, m.plies, m.wall_seconds
        );
    })?;
    println!(
        "finished at iteration {} ({} parameters)",
        cp.iteration,
        cp.model.parameter_count()
    );
    Ok(())
}

pub fn cmd_perft(fen: &str, depth: u32, variant: Variant) -> Result<(), CliError> {
    let pos = position_of(fen, variant)?;
    println!("{}", pos.perft(depth));
    Ok(())
}

pub fn cmd_encode(fen: &str, variant: Variant, out_dir: &Path) -> Result<(), CliError> {
    let pos = position_of(fen, variant)?;
    let graph = MoveGraph::build(variant);
    let fs = encode_position(&pos, &graph).expect("variant match");
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_atomic(&out_dir.join("nodes.csv"), &node_features_csv(&fs))?;
    write_atomic(&out_dir.join("edges.csv"), &edge_features_csv(&fs, &graph))?;
    println!(
        "wrote {} node rows and {} edge rows to {}",
        graph.node_count(),
        graph.edge_count(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_gradcheck(seeds: usize) -> Result<(), CliError> {
    let report = run_gradcheck(seeds, 3);
    for (name, runs, err, tol) in &report.checks {
        let status = if err <= tol { "ok" } else { "FAIL" };
        println!("{status:4} {name:<22} seeds {runs:>4}  max rel err {err:.3e}  (tol {tol:.0e})");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation("gradient check failed".into()))
    }
}

pub fn cmd_selfplay(
    config: &RunConfig,
    ckpt: Option<&Path>,
    games: u32,
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = &config.train;
    let cp = match ckpt {
        Some(path) => load_checkpoint(path)?,
        None => Checkpoint::fresh(
            crate::net::ModelConfig::new(cfg.hidden, cfg.blocks),
            cfg.seed,
        ),
    };
    let graph = MoveGraph::build(cfg.variant);
    let mut all_frames = Vec::new();
    let mut records = Vec::new();
    let evaluator = Evaluator::new(&cp.model, &graph);
    for game_idx in 0..games {
        let mut params = search_params(config);
        params.seed = cfg.seed.wrapping_add(game_idx as u64);
        let game = play_game(&evaluator, &evaluator, &params, cfg.max_plies, params.seed)
            .map_err(crate::selfplay::TrainError::from)?;
        println!(
            "game {game_idx}: {} plies, {} ({:?})",
            game.moves.len(),
            game.outcome.pgn_result(),
            game.outcome.reason
        );
        all_frames.extend(frames_from_game(&game, cp.iteration));
        records.push(GameRecord {
            variant: cfg.variant,
            white: "selfplay".into(),
            black: "selfplay".into(),
            moves: game.moves,
            outcome: game.outcome,
            start: None,
            round: Some(game_idx + 1),
        });
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        export_match_pgn(&records, &dir.join("selfplay.pgn"))?;
        save_window(
            &FrameWindow { frames: all_frames },
            cfg.variant,
            &dir.join("frames.window"),
        )
        .map_err(crate::selfplay::TrainError::from)?;
        println!("wrote PGN and frame window to {}", dir.display());
    }
    Ok(())
}

pub fn cmd_plot(inputs: &[PathBuf], out_svg: &Path, out_csv: Option<&Path>) -> Result<(), CliError> {
    let mut series: Vec<Series> = Vec::new();
    for input in inputs {
        for s in read_series(input)? {
            match series.iter_mut().find(|t| t.label == s.label) {
                Some(t) => t.points.extend(s.points),
                None => series.push(s),
            }
        }
    }
    write_atomic(out_svg, &render_svg(&series))?;
    let merged = merged_csv(&series);
    if let Some(csv) = out_csv {
        write_atomic(csv, &merged)?;
    }
    println!(
        "plotted {} series ({} points) to {}",
        series.len(),
        series.iter().map(|s| s.points.len()).sum::<usize>(),
        out_svg.display()
    );
    Ok(())
}

fn position_of(fen: &str, variant: Variant) -> Result<Position, CliError> {
    if fen == "startpos" {
        Ok(Position::starting(variant))
    } else {
        Ok(parse_fen(fen, variant)?)
    }
}

/// A rating-tournament roster: `checkpoint path, label` per line.
pub struct Roster {
    pub players: Vec<(PathBuf, String)>,
}

pub fn read_roster(path: &Path) -> Result<Roster, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut players = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((ckpt, label)) = line.split_once(',') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected 'checkpoint,label'",
                path.display(),
                lineno + 1
            )));
        };
        players.push((PathBuf::from(ckpt.trim()), label.trim().to_string()));
    }
    if players.is_empty() {
        return Err(CliError::Config(format!(
            "roster {} lists no players",
            path.display()
        )));
    }
    Ok(Roster { players })
}

/// Rating tournament: load the roster, seed a round-robin among the first
/// ten players, run adaptive matchmaking for the rest, and emit ratings
/// with standard deviations plus the PGNs of every game played.
pub fn cmd_rate(
    config: &RunConfig,
    roster_path: &Path,
    out_dir: &Path,
    store: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = &config.train;
    let roster = read_roster(roster_path)?;
    let graph = MoveGraph::build(cfg.variant);
    let games_dir = out_dir.join("games");
    std::fs::create_dir_all(&games_dir).map_err(|e| CliError::io(&games_dir, e))?;
    let store_path = store
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| out_dir.join("matches.csv"));

    let mut checkpoints: BTreeMap<String, Checkpoint> = BTreeMap::new();
    for (path, label) in &roster.players {
        checkpoints.insert(label.clone(), load_checkpoint(path)?);
    }

    let mut table = if store_path.exists() {
        MatchTable::load_csv(&store_path)?
    } else {
        MatchTable::new()
    };

    let mut match_counter: u64 = table
        .players()
        .iter()
        .map(|p| table.games_of(p) as u64)
        .sum();

    let play_match = |a: &str,
                          b: &str,
                          games: u32,
                          counter: &mut u64|
     -> Result<Wdl, CliError> {
        let cp_a = &checkpoints[a];
        let cp_b = &checkpoints[b];
        let eval_a = Evaluator::new(&cp_a.model, &graph);
        let eval_b = Evaluator::new(&cp_b.model, &graph);
        let mut wdl = Wdl::default();
        let mut records = Vec::with_capacity(games as usize);
        for g in 0..games {
            // Colors alternate: even games have `a` as white.
            let a_is_white = g % 2 == 0;
            let (white, black, wl, bl) = if a_is_white {
                (&eval_a, &eval_b, a, b)
            } else {
                (&eval_b, &eval_a, b, a)
            };
            let mut params = search_params(config);
            params.seed = cfg.seed ^ (*counter).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            *counter += 1;
            let game = play_game(white, black, &params, cfg.max_plies, params.seed)
                .map_err(crate::selfplay::TrainError::from)?;
            match (game.outcome.result, a_is_white) {
                (crate::chess::GameResult::Draw, _) => wdl.draws += 1,
                (crate::chess::GameResult::WhiteWin, true)
                | (crate::chess::GameResult::BlackWin, false) => wdl.wins += 1,
                _ => wdl.losses += 1,
            }
            records.push(GameRecord {
                variant: cfg.variant,
                white: wl.to_string(),
                black: bl.to_string(),
                moves: game.moves,
                outcome: game.outcome,
                start: None,
                round: Some(g + 1),
            });
        }
        export_match_pgn(&records, &games_dir.join(format!("{a}__vs__{b}.pgn")))?;
        println!("match {a} vs {b}: +{} ={} -{}", wdl.wins, wdl.draws, wdl.losses);
        Ok(wdl)
    };

    // Round-robin seeding among the first players without stored games.
    let seed_count = config.rate_initial_players.min(roster.players.len());
    let labels: Vec<String> = roster.players.iter().map(|(_, l)| l.clone()).collect();
    for i in 0..seed_count {
        for j in (i + 1)..seed_count {
            let (a, b) = (&labels[i], &labels[j]);
            if table.get(a, b).map(|w| w.games()).unwrap_or(0) > 0 {
                continue;
            }
            let wdl = play_match(a, b, config.rate_games, &mut match_counter)?;
            table.record(a, b, wdl)?;
            table.save_csv(&store_path)?;
        }
    }

    // Adaptive matchmaking for everyone else without games.
    let unmatched: Vec<String> = labels
        .iter()
        .skip(seed_count)
        .filter(|l| table.games_of(l) == 0)
        .cloned()
        .collect();
    if !unmatched.is_empty() {
        let mut counter = match_counter;
        let mut error: Option<CliError> = None;
        run_matchmaking(&mut table, &unmatched, config.rate_games, |a, b, games| {
            match play_match(a, b, games, &mut counter) {
                Ok(wdl) => Ok(wdl),
                Err(e) => {
                    let msg = e.to_string();
                    error = Some(e);
                    Err(msg)
                }
            }
        })
        .map_err(|e| match error.take() {
            Some(inner) => inner,
            None => CliError::from(e),
        })?;
        table.save_csv(&store_path)?;
    }

    let fitted = fit_ratings_wls(&table)?;
    write_ratings(&fitted, &out_dir.join("ratings.csv"))?;
    println!("player{:>26}rating   2-sigma", "");
    let mut rows: Vec<(&String, f64, f64)> = fitted
        .players
        .iter()
        .zip(fitted.ratings.iter().zip(&fitted.sigmas))
        .map(|(p, (&r, &s))| (p, r, s))
        .collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (player, rating, sigma) in rows {
        println!("{player:<28}{rating:>8.1}  +/-{:>6.1}", 2.0 * sigma);
    }
    Ok(())
}

fn write_ratings(fitted: &RatingVector, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("player,rating,sigma\n");
    for (player, (rating, sigma)) in fitted
        .players
        .iter()
        .zip(fitted.ratings.iter().zip(&fitted.sigmas))
    {
        out.push_str(&format!("{player},{rating:.3},{sigma:.3}\n"));
    }
    write_atomic(path, &out)
}

/// Evaluates a checkpoint's policy/value on random positions of a variant;
/// used by the transfer demonstration and handy for smoke checks.
pub fn describe_eval(cp: &Checkpoint, variant: Variant, positions: u32, seed: u64) -> String {
    use rand::{Rng, SeedableRng};
    let graph = MoveGraph::build(variant);
    let evaluator = Evaluator::new(&cp.model, &graph);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut lines = String::new();
    for i in 0..positions {
        let mut pos = Position::starting(variant);
        let plies = rng.gen_range(0..30);
        for _ in 0..plies {
            let moves = pos.legal_moves();
            if moves.is_empty() {
                break;
            }
            pos = pos.apply_move_unchecked(moves[rng.gen_range(0..moves.len())]);
        }
        if pos.legal_moves().is_empty() {
            continue;
        }
        let eval = evaluator.evaluate(&pos).expect("variant match");
        let total: f64 = eval.actions.iter().map(|a| a.prob).sum();
        lines.push_str(&format!(
            "position {i}: value {:+.3}, {} legal actions, policy mass {:.6}\n",
            eval.value,
            eval.actions.len(),
            total
        ));
    }
    lines
}
