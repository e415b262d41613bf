//! Export of the SAA problem as a Big-M mixed-integer model.
//!
//! Shared variables: `alpha`, `ainv = 1/alpha` and `afac = alpha/(alpha-1)`.
//! Per scenario `s`, names are `s<s>_<var>_<t>`:
//!
//! * `t = 0`: `pl pu L il iu` (interval bounds, liquidity, inverse bounds).
//! * `1 ≤ t < T`: binaries `zl zu zm z b`; continuous
//!   `pl pu L il iu xw yw x y d cf sf`.
//! * `t = T`: binaries `zl zu zm`; continuous `xw yw cf sf`.
//!
//! `zl`, `zu`, `zm` select the case below, above or inside the interval held
//! over the step, `z` marks a reallocation, `xw`/`yw` are the withdrawn
//! reserves, `x`/`y` the holdings after rebalancing, `d = |y - yw|` with
//! sign selector `b`, `cf` the earned fee rate and `sf` the accumulated
//! fees. Every implication `z = 1 ⇒ e = r` becomes the pair
//! `e ± M z ≶ r ± M`, and the same for `z = 0`; products of a binary with a
//! continuous variable are handled this way rather than as product terms.
//!
//! Constraint counts per scenario: 5 at `t = 0`; 21 shared by every step,
//! plus 1 at `t = 1` or 4 at later steps for fee accumulation; 27 more for
//! each `t < T`. Two shared constraints define `ainv` and `afac`.

use std::collections::HashMap;

use super::model::{Constraint, ModelDocument, ModelHeader, Sense, Term, VarDecl, VarKind};
use super::SaaConfig;
use crate::amm::concentration_factor;
use crate::error::{Error, Result};
use crate::stochastic::PricePath;
use crate::strategy::{run_strategy, FeeRates, StrategyParams};

/// Minimum sqrt-price margin separating "inside" from a trigger.
pub const TRIGGER_EPSILON: f64 = 1e-9;

const BIG_M_SAFETY: f64 = 4.0;

/// Lower bound on a usable Big-M for these scenarios: the largest of `π`
/// and `1/π` times a cap on liquidity. The cap assumes wealth never exceeds
/// the initial wealth scaled by the largest price ratio on any path, plus
/// fees earned at the most concentrated α. It is a heuristic envelope,
/// not a proof.
pub fn required_big_m(
    paths: &[PricePath],
    alpha_bounds: (f64, f64),
    fee_rate: f64,
    initial_wealth: f64,
) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::param("no scenarios to export"));
    }
    let mut ratio: f64 = 1.0;
    let mut p_min = f64::INFINITY;
    let mut p_max: f64 = 0.0;
    let mut horizon = 0;
    for path in paths {
        let p0 = path.initial().value();
        let (lo, hi) = path.min_max();
        ratio = ratio.max((hi.value() / p0).powi(2));
        p_min = p_min.min(lo.value());
        p_max = p_max.max(hi.value());
        horizon = horizon.max(path.horizon());
    }
    let conc = concentration_factor(alpha_bounds.0);
    let wealth_cap =
        initial_wealth * ratio * (1.0 + horizon as f64 * fee_rate * conc / p_min);
    let liquidity_cap = conc * wealth_cap / p_min;
    Ok(p_max.max(1.0 / p_min) * liquidity_cap)
}

struct Builder {
    m: f64,
    variables: Vec<VarDecl>,
    constraints: Vec<Constraint>,
}

impl Builder {
    fn var(&mut self, name: String, lower: f64, upper: f64) -> String {
        self.variables.push(VarDecl {
            name: name.clone(),
            kind: VarKind::Continuous { lower, upper },
        });
        name
    }

    fn bin(&mut self, name: String) -> String {
        self.variables.push(VarDecl {
            name: name.clone(),
            kind: VarKind::Binary,
        });
        name
    }

    fn con(&mut self, name: String, terms: Vec<Term>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
    }

    /// `when = 1 ⇒ terms = rhs`.
    fn if_one(&mut self, name: &str, terms: Vec<Term>, rhs: f64, when: &str) {
        let m = self.m;
        let mut hi = terms.clone();
        hi.push(Term::linear(m, when));
        self.con(format!("{name}_hi"), hi, Sense::Le, rhs + m);
        let mut lo = terms;
        lo.push(Term::linear(-m, when));
        self.con(format!("{name}_lo"), lo, Sense::Ge, rhs - m);
    }

    /// `when = 0 ⇒ terms = rhs`.
    fn if_zero(&mut self, name: &str, terms: Vec<Term>, rhs: f64, when: &str) {
        let m = self.m;
        let mut hi = terms.clone();
        hi.push(Term::linear(-m, when));
        self.con(format!("{name}_hi"), hi, Sense::Le, rhs);
        let mut lo = terms;
        lo.push(Term::linear(m, when));
        self.con(format!("{name}_lo"), lo, Sense::Ge, rhs);
    }
}

fn lin(c: f64, v: &str) -> Term {
    Term::linear(c, v)
}

fn prod(c: f64, a: &str, b: &str) -> Term {
    Term::product(c, a, b)
}

/// Builds the model for `paths` with a constant fee rate. `big_m` defaults
/// to four times [`required_big_m`]; smaller values are rejected. Only the
/// plain trigger (`γ = 0`) is expressible.
pub fn export_minlp(
    paths: &[PricePath],
    config: &SaaConfig,
    fee_rate: f64,
    params: &StrategyParams,
    initial_wealth: f64,
    big_m: Option<f64>,
) -> Result<ModelDocument> {
    config.validate()?;
    params.validate()?;
    if params.gamma != 0.0 {
        return Err(Error::param("model export supports gamma = 0 only"));
    }
    if !(fee_rate.is_finite() && fee_rate >= 0.0) {
        return Err(Error::param(format!("fee rate must be nonnegative, got {fee_rate}")));
    }
    if !(initial_wealth.is_finite() && initial_wealth > 0.0) {
        return Err(Error::param("initial wealth must be positive"));
    }
    let horizon = paths.first().map_or(0, PricePath::horizon);
    if horizon == 0 || paths.iter().any(|p| p.horizon() != horizon) {
        return Err(Error::param("scenarios must share a horizon of at least one step"));
    }
    let required = required_big_m(paths, config.alpha_bounds, fee_rate, initial_wealth)?;
    let m = match big_m {
        Some(m) if m.is_nan() || m < required => {
            return Err(Error::param(format!(
                "big M {m} is below the bound {required} implied by the scenarios"
            )))
        }
        Some(m) => m,
        None => BIG_M_SAFETY * required,
    };

    let (lo, hi) = config.alpha_bounds;
    let mut b = Builder {
        m,
        variables: Vec::new(),
        constraints: Vec::new(),
    };
    let alpha = b.var("alpha".into(), lo, hi);
    let ainv = b.var("ainv".into(), 1.0 / hi, 1.0 / lo);
    let afac = b.var("afac".into(), concentration_factor(hi), concentration_factor(lo));
    b.con("ainv_def".into(), vec![prod(1.0, &alpha, &ainv)], Sense::Eq, 1.0);
    b.con(
        "afac_def".into(),
        vec![prod(1.0, &afac, &alpha), lin(-1.0, &afac), lin(-1.0, &alpha)],
        Sense::Eq,
        0.0,
    );

    let inf = f64::INFINITY;
    let fbar = fee_rate;
    let weight = 1.0 / paths.len() as f64;
    let mut objective = Vec::new();
    for (s, path) in paths.iter().enumerate() {
        let n = |v: &str, t: usize| format!("s{s}_{v}_{t}");
        let pr: Vec<f64> = path.sqrt_prices().iter().map(|p| p.value()).collect();

        let p0 = pr[0];
        let mut pl = b.var(n("pl", 0), 0.0, inf);
        let mut pu = b.var(n("pu", 0), 0.0, inf);
        let mut liq = b.var(n("L", 0), 0.0, inf);
        let mut il = b.var(n("il", 0), 0.0, inf);
        let mut iu = b.var(n("iu", 0), 0.0, inf);
        b.con(n("pl_def", 0), vec![lin(1.0, &pl), lin(-p0, &ainv)], Sense::Eq, 0.0);
        b.con(n("pu_def", 0), vec![lin(1.0, &pu), lin(-p0, &alpha)], Sense::Eq, 0.0);
        b.con(
            n("L_def", 0),
            vec![lin(1.0, &liq), lin(-initial_wealth / (2.0 * p0), &afac)],
            Sense::Eq,
            0.0,
        );
        b.con(n("il_def", 0), vec![prod(1.0, &pl, &il)], Sense::Eq, 1.0);
        b.con(n("iu_def", 0), vec![prod(1.0, &pu, &iu)], Sense::Eq, 1.0);

        let mut prev_z: Option<String> = None;
        let mut prev_sf: Option<String> = None;
        for t in 1..=horizon {
            let last = t == horizon;
            let (p, pp) = (pr[t], pr[t - 1]);
            let (sq, sq_prev) = (p * p, pp * pp);
            let eps = TRIGGER_EPSILON;
            let m = b.m;

            let zl = b.bin(n("zl", t));
            let zu = b.bin(n("zu", t));
            let zm = b.bin(n("zm", t));
            let z = (!last).then(|| b.bin(n("z", t)));
            let sign = (!last).then(|| b.bin(n("b", t)));
            let xw = b.var(n("xw", t), 0.0, inf);
            let yw = b.var(n("yw", t), 0.0, inf);
            let cf = b.var(n("cf", t), 0.0, inf);
            let sf = b.var(n("sf", t), 0.0, inf);

            // case selection against the interval held over the step
            b.con(n("trig_l_on", t), vec![lin(-1.0, &pl), lin(m, &zl)], Sense::Le, m - p);
            b.con(n("trig_l_off", t), vec![lin(-1.0, &pl), lin(m, &zl)], Sense::Ge, eps - p);
            b.con(n("trig_u_on", t), vec![lin(1.0, &pu), lin(m, &zu)], Sense::Le, m + p);
            b.con(n("trig_u_off", t), vec![lin(1.0, &pu), lin(m, &zu)], Sense::Ge, eps + p);
            b.con(
                n("cases", t),
                vec![lin(1.0, &zl), lin(1.0, &zu), lin(1.0, &zm)],
                Sense::Eq,
                1.0,
            );

            // withdrawn reserves
            b.if_one(
                &n("wl_x", t),
                vec![lin(1.0, &xw), prod(-1.0, &liq, &il), prod(1.0, &liq, &iu)],
                0.0,
                &zl,
            );
            b.con(n("wl_y", t), vec![lin(1.0, &yw), lin(m, &zl)], Sense::Le, m);
            b.if_one(
                &n("wm_x", t),
                vec![lin(1.0, &xw), lin(-1.0 / p, &liq), prod(1.0, &liq, &iu)],
                0.0,
                &zm,
            );
            b.if_one(
                &n("wm_y", t),
                vec![lin(1.0, &yw), lin(-p, &liq), prod(1.0, &liq, &pl)],
                0.0,
                &zm,
            );
            b.con(n("wu_x", t), vec![lin(1.0, &xw), lin(m, &zu)], Sense::Le, m);
            b.if_one(
                &n("wu_y", t),
                vec![lin(1.0, &yw), prod(-1.0, &liq, &pu), prod(1.0, &liq, &pl)],
                0.0,
                &zu,
            );

            // fee interpolation, multiplied through by the step's price change
            b.if_one(
                &n("fee_l", t),
                vec![lin(sq_prev - sq, &cf), prod(fbar, &pl, &pl)],
                fbar * sq_prev,
                &zl,
            );
            b.if_one(&n("fee_m", t), vec![lin(1.0, &cf)], fbar, &zm);
            b.if_one(
                &n("fee_u", t),
                vec![lin(sq - sq_prev, &cf), prod(-fbar, &pu, &pu)],
                -fbar * sq_prev,
                &zu,
            );

            // fee accumulation; claimed fees reset after a reallocation
            match (&prev_z, &prev_sf) {
                (Some(zp), Some(sp)) => {
                    b.if_one(&n("acc_claim", t), vec![lin(1.0, &sf), prod(-1.0, &cf, &liq)], 0.0, zp);
                    b.if_zero(
                        &n("acc_keep", t),
                        vec![lin(1.0, &sf), lin(-1.0, sp), prod(-1.0, &cf, &liq)],
                        0.0,
                        zp,
                    );
                }
                _ => b.con(
                    n("acc", t),
                    vec![lin(1.0, &sf), prod(-1.0, &cf, &liq)],
                    Sense::Eq,
                    0.0,
                ),
            }

            if last {
                objective.push(lin(weight * sq, &xw));
                objective.push(lin(weight, &yw));
                objective.push(lin(weight, &sf));
                break;
            }
            let z = z.expect("created before the last step");
            let sign = sign.expect("created before the last step");
            let pl_t = b.var(n("pl", t), 0.0, inf);
            let pu_t = b.var(n("pu", t), 0.0, inf);
            let liq_t = b.var(n("L", t), 0.0, inf);
            let il_t = b.var(n("il", t), 0.0, inf);
            let iu_t = b.var(n("iu", t), 0.0, inf);
            let x = b.var(n("x", t), 0.0, inf);
            let y = b.var(n("y", t), 0.0, inf);
            let d = b.var(n("d", t), 0.0, inf);

            b.con(
                n("z_def", t),
                vec![lin(1.0, &z), lin(-1.0, &zl), lin(-1.0, &zu)],
                Sense::Eq,
                0.0,
            );
            b.if_one(&n("pl_new", t), vec![lin(1.0, &pl_t), lin(-p, &ainv)], 0.0, &z);
            b.if_zero(&n("pl_keep", t), vec![lin(1.0, &pl_t), lin(-1.0, &pl)], 0.0, &z);
            b.if_one(&n("pu_new", t), vec![lin(1.0, &pu_t), lin(-p, &alpha)], 0.0, &z);
            b.if_zero(&n("pu_keep", t), vec![lin(1.0, &pu_t), lin(-1.0, &pu)], 0.0, &z);
            b.con(n("il_def", t), vec![prod(1.0, &pl_t, &il_t)], Sense::Eq, 1.0);
            b.con(n("iu_def", t), vec![prod(1.0, &pu_t, &iu_t)], Sense::Eq, 1.0);

            // d = |y - yw|
            let up = vec![lin(1.0, &d), lin(-1.0, &y), lin(1.0, &yw)];
            let down = vec![lin(1.0, &d), lin(1.0, &y), lin(-1.0, &yw)];
            b.con(n("abs_up_ge", t), up.clone(), Sense::Ge, 0.0);
            b.con(n("abs_down_ge", t), down.clone(), Sense::Ge, 0.0);
            let mut up_le = up;
            up_le.push(lin(m, &sign));
            b.con(n("abs_up_le", t), up_le, Sense::Le, m);
            let mut down_le = down;
            down_le.push(lin(-m, &sign));
            b.con(n("abs_down_le", t), down_le, Sense::Le, 0.0);

            b.if_one(
                &n("rebal_value", t),
                vec![
                    lin(sq, &x),
                    lin(1.0, &y),
                    lin(-sq, &xw),
                    lin(-1.0, &yw),
                    lin(params.trade_fee, &d),
                    lin(-1.0, &sf),
                ],
                -params.gas_cost,
                &z,
            );
            b.if_one(&n("rebal_balance", t), vec![lin(1.0, &y), lin(-sq, &x)], 0.0, &z);
            b.if_zero(&n("carry_x", t), vec![lin(1.0, &x), lin(-1.0, &xw)], 0.0, &z);
            b.if_zero(&n("carry_y", t), vec![lin(1.0, &y), lin(-1.0, &yw)], 0.0, &z);
            b.if_one(
                &n("liq_new", t),
                vec![lin(1.0, &liq_t), prod(-1.0 / p, &afac, &y)],
                0.0,
                &z,
            );
            b.if_zero(&n("liq_keep", t), vec![lin(1.0, &liq_t), lin(-1.0, &liq)], 0.0, &z);

            pl = pl_t;
            pu = pu_t;
            liq = liq_t;
            il = il_t;
            iu = iu_t;
            prev_z = Some(z);
            prev_sf = Some(sf);
        }
    }

    Ok(ModelDocument {
        header: ModelHeader {
            scenarios: paths.len(),
            steps: horizon,
            alpha_bounds: config.alpha_bounds,
            big_m: m,
            epsilon: TRIGGER_EPSILON,
        },
        variables: b.variables,
        constraints: b.constraints,
        objective,
    })
}

/// Values of every model variable implied by simulating the strategy at
/// `params.alpha` on each path. Fails if any path ends in ruin, which the
/// model cannot represent.
pub fn engine_assignment(
    paths: &[PricePath],
    fee_rate: f64,
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<HashMap<String, f64>> {
    let alpha = params.alpha;
    let mut v = HashMap::new();
    v.insert("alpha".to_string(), alpha);
    v.insert("ainv".to_string(), 1.0 / alpha);
    v.insert("afac".to_string(), concentration_factor(alpha));
    for (s, path) in paths.iter().enumerate() {
        let run = run_strategy(path, FeeRates::Constant(fee_rate), params, initial_wealth)?;
        if run.ruin_step.is_some() {
            return Err(Error::param(format!("scenario {s} ends in ruin")));
        }
        let mut put = |name: &str, t: usize, x: f64| {
            v.insert(format!("s{s}_{name}_{t}"), x);
        };
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let horizon = path.horizon();
        let pos = run.initial.position;
        put("pl", 0, pos.interval.lower().value());
        put("pu", 0, pos.interval.upper().value());
        put("L", 0, pos.liquidity);
        put("il", 0, 1.0 / pos.interval.lower().value());
        put("iu", 0, 1.0 / pos.interval.upper().value());
        let mut prev = pos;
        for rec in &run.steps {
            let t = rec.t;
            let p = rec.price.value();
            let below = p <= prev.interval.lower().value();
            let above = p >= prev.interval.upper().value();
            let ev = &rec.events;
            put("zl", t, flag(below));
            put("zu", t, flag(above));
            put("zm", t, flag(!below && !above));
            put("xw", t, ev.withdrawn.x);
            put("yw", t, ev.withdrawn.y);
            put("cf", t, ev.fee_rate_earned);
            put("sf", t, ev.accumulated_fees);
            if t == horizon {
                break;
            }
            let st = &rec.state;
            let z = ev.reallocated();
            let (y, yw) = (st.holdings.y, ev.withdrawn.y);
            put("z", t, flag(z));
            put("b", t, flag(y >= yw));
            put("d", t, (y - yw).abs());
            put("x", t, st.holdings.x);
            put("y", t, y);
            put("pl", t, st.position.interval.lower().value());
            put("pu", t, st.position.interval.upper().value());
            put("L", t, st.position.liquidity);
            put("il", t, 1.0 / st.position.interval.lower().value());
            put("iu", t, 1.0 / st.position.interval.upper().value());
            prev = st.position;
        }
    }
    Ok(v)
}
