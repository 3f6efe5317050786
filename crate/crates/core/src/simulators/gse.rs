//! General stochastic epidemic simulated exactly with the Gillespie algorithm.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GseConfig {
    pub population: u32,
    pub initial_infected: u32,
    pub obs_dt: f64,
    pub obs_count: usize,
}

impl Default for GseConfig {
    fn default() -> Self {
        Self {
            population: 100,
            initial_infected: 5,
            obs_dt: 0.5,
            obs_count: 100,
        }
    }
}

/// State right after an event (or the initial state at time 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GseEvent {
    pub time: f64,
    pub susceptible: u32,
    pub infected: u32,
    pub recovered: u32,
}

struct Gillespie {
    beta: f64,
    gamma: f64,
    state: GseEvent,
}

impl Gillespie {
    fn new(theta: &[f64], cfg: &GseConfig) -> Self {
        assert!(
            cfg.initial_infected >= 1 && cfg.initial_infected < cfg.population,
            "initial infected must lie in [1, population)"
        );
        Self {
            beta: theta[0].max(0.0),
            gamma: theta[1].max(0.0),
            state: GseEvent {
                time: 0.0,
                susceptible: cfg.population - cfg.initial_infected,
                infected: cfg.initial_infected,
                recovered: 0,
            },
        }
    }

    /// Fires the next reaction, or returns `None` once no reaction can occur.
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<GseEvent> {
        let s = &mut self.state;
        let infection = self.beta * s.susceptible as f64 * s.infected as f64;
        let recovery = self.gamma * s.infected as f64;
        let total = infection + recovery;
        if !(total > 0.0) {
            return None;
        }
        s.time += Exp::new(total).expect("positive total rate").sample(rng);
        if rng.random::<f64>() * total < infection {
            s.susceptible -= 1;
            s.infected += 1;
        } else {
            s.infected -= 1;
            s.recovered += 1;
        }
        Some(*s)
    }
}

/// Full event trajectory up to `t_max`, starting with the initial state.
pub fn simulate_gse_events<R: Rng + ?Sized>(
    theta: &[f64],
    cfg: &GseConfig,
    t_max: f64,
    rng: &mut R,
) -> Vec<GseEvent> {
    let mut sim = Gillespie::new(theta, cfg);
    let mut out = vec![sim.state];
    while let Some(ev) = sim.step(rng) {
        if ev.time > t_max {
            break;
        }
        out.push(ev);
    }
    out
}

/// Two-channel series `(X, Y)` observed at `iΔt`, `i = 0..=D`, carrying the
/// last event's state forward.
pub fn simulate_gse<R: Rng + ?Sized>(theta: &[f64], cfg: &GseConfig, rng: &mut R) -> TimeSeries {
    let mut sim = Gillespie::new(theta, cfg);
    let mut current = sim.state;
    let mut pending = sim.step(rng);
    let mut times = Vec::with_capacity(cfg.obs_count + 1);
    let mut values = Vec::with_capacity(2 * (cfg.obs_count + 1));
    for i in 0..=cfg.obs_count {
        let t = i as f64 * cfg.obs_dt;
        while let Some(ev) = pending {
            if ev.time > t {
                break;
            }
            current = ev;
            pending = sim.step(rng);
        }
        times.push(t);
        values.push(current.susceptible as f64);
        values.push(current.infected as f64);
    }
    TimeSeries::from_flat(times, values, 2).expect("valid epidemic series")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn conservation_and_monotone_susceptible() {
        let cfg = GseConfig::default();
        for seed in 0..20 {
            let ev = simulate_gse_events(&[0.01, 0.1], &cfg, f64::INFINITY, &mut rng_for(seed, 0));
            for w in ev.windows(2) {
                assert!(w[1].susceptible <= w[0].susceptible);
                assert!(w[1].time >= w[0].time);
            }
            for e in &ev {
                assert_eq!(e.susceptible + e.infected + e.recovered, cfg.population);
            }
            assert_eq!(ev.last().unwrap().infected, 0);
        }
    }

    #[test]
    fn no_infection_when_beta_zero() {
        let cfg = GseConfig::default();
        let ev = simulate_gse_events(&[0.0, 0.3], &cfg, f64::INFINITY, &mut rng_for(1, 0));
        assert!(ev.iter().all(|e| e.susceptible == 95));
        assert!(ev.windows(2).all(|w| w[1].infected <= w[0].infected));
        assert_eq!(ev.last().unwrap().infected, 0);
    }

    #[test]
    fn no_recovery_infects_everyone() {
        let cfg = GseConfig::default();
        let ev = simulate_gse_events(&[1.0, 0.0], &cfg, f64::INFINITY, &mut rng_for(2, 0));
        let last = ev.last().unwrap();
        assert_eq!(last.susceptible, 0);
        assert_eq!(last.infected, 95 + 5);
    }

    #[test]
    fn observed_series_shape() {
        let cfg = GseConfig::default();
        let s = simulate_gse(&[0.01, 0.1], &cfg, &mut rng_for(3, 0));
        assert_eq!(s.len(), 101);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.row(0), &[95.0, 5.0]);
        assert!((s.times()[100] - 50.0).abs() < 1e-12);
        for r in s.rows() {
            assert!(r[0] + r[1] <= 100.0);
        }
        // observation matches the event trajectory with the same stream
        let ev = simulate_gse_events(&[0.01, 0.1], &cfg, 50.0, &mut rng_for(3, 0));
        for (i, r) in s.rows().enumerate() {
            let t = i as f64 * 0.5;
            let state = ev.iter().take_while(|e| e.time <= t).last().unwrap();
            assert_eq!(r, &[state.susceptible as f64, state.infected as f64]);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = GseConfig::default();
        let a = simulate_gse(&[0.02, 0.2], &cfg, &mut rng_for(8, 3));
        let b = simulate_gse(&[0.02, 0.2], &cfg, &mut rng_for(8, 3));
        assert_eq!(a, b);
    }
}
