//! Random computation graphs for gradient checks.

use lbs_core::diffnum::{Matrix, Tape, Var};
use rand::Rng;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
// Below this gradient magnitude the comparison is absolute.
pub const GRAD_FLOOR: f64 = 1e-3;
// Kinked ops must see inputs at least this far from the kink.
pub const KINK_MARGIN: f64 = 1e-3;

pub const ROWS: usize = 3;
pub const COLS: usize = 4;

#[derive(Debug, Clone, Copy)]
pub enum Op {
    AddLeaf,
    SubLeaf,
    MulLeaf,
    DivPositive,
    MinLeaf,
    AddRow,
    MulRow,
    MulCol,
    Neg,
    Scale(f64),
    Offset(f64),
    Relu,
    LeakyRelu,
    Softplus,
    DampedExp,
    LogSoftplus,
    Square,
    Clamp,
    MatMul,
    ConcatSlice(usize),
}

/// Leaves: x (ROWS x COLS), y (ROWS x COLS), w (COLS x COLS), row (1 x COLS), col (ROWS x 1).
#[derive(Debug, Clone)]
pub struct Inputs {
    pub leaves: Vec<Matrix>,
}

pub fn kink_distance(m: &Matrix, kinks: &[f64]) -> f64 {
    m.as_slice()
        .iter()
        .flat_map(|v| kinks.iter().map(move |k| (v - k).abs()))
        .fold(f64::INFINITY, f64::min)
}

/// Builds the graph; returns the tape, leaf vars, scalar loss and the smallest kink distance seen.
pub fn build(ops: &[Op], inputs: &Inputs) -> (Tape, Vec<Var>, Var, f64) {
    let mut t = Tape::new();
    let leaves: Vec<Var> = inputs.leaves.iter().map(|m| t.variable(m.clone())).collect();
    let (x, y, w, row, col) = (leaves[0], leaves[1], leaves[2], leaves[3], leaves[4]);
    let mut margin = f64::INFINITY;
    let mut cur = x;
    for &op in ops {
        cur = match op {
            Op::AddLeaf => t.add(cur, y).unwrap(),
            Op::SubLeaf => t.sub(cur, y).unwrap(),
            Op::MulLeaf => t.mul(cur, y).unwrap(),
            Op::DivPositive => {
                let sp = t.softplus(y);
                let den = t.offset(sp, 0.5);
                t.div(cur, den).unwrap()
            }
            Op::MinLeaf => {
                let gap = t.value(cur).zip_map(t.value(y), |a, b| a - b);
                margin = margin.min(kink_distance(&gap, &[0.0]));
                t.min(cur, y).unwrap()
            }
            Op::AddRow => t.add_row(cur, row).unwrap(),
            Op::MulRow => t.mul_row(cur, row).unwrap(),
            Op::MulCol => t.mul_col(cur, col).unwrap(),
            Op::Neg => t.neg(cur),
            Op::Scale(c) => t.scale(cur, c),
            Op::Offset(c) => t.offset(cur, c),
            Op::Relu => {
                margin = margin.min(kink_distance(t.value(cur), &[0.0]));
                t.relu(cur)
            }
            Op::LeakyRelu => {
                margin = margin.min(kink_distance(t.value(cur), &[0.0]));
                t.leaky_relu(cur, 0.01)
            }
            Op::Softplus => t.softplus(cur),
            Op::DampedExp => {
                let s = t.scale(cur, 0.3);
                t.exp(s)
            }
            Op::LogSoftplus => {
                let sp = t.softplus(cur);
                let pos = t.offset(sp, 0.1);
                t.ln(pos)
            }
            Op::Square => t.square(cur),
            Op::Clamp => {
                margin = margin.min(kink_distance(t.value(cur), &[-1.0, 1.0]));
                t.clamp(cur, -1.0, 1.0)
            }
            Op::MatMul => t.matmul(cur, w).unwrap(),
            Op::ConcatSlice(start) => {
                let both = t.concat(&[cur, y]).unwrap();
                t.slice_cols(both, start, start + COLS).unwrap()
            }
        };
    }
    let rs = t.row_sum(cur);
    let weighted = t.mul(rs, col).unwrap();
    let s = t.sum(weighted);
    let m = t.mean(cur);
    let loss = t.add(s, m).unwrap();
    (t, leaves, loss, margin)
}

pub fn loss_at(ops: &[Op], inputs: &Inputs) -> f64 {
    let (t, _, loss, _) = build(ops, inputs);
    t.value(loss).item()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

pub const SHAPES: [(usize, usize); 5] = [(ROWS, COLS), (ROWS, COLS), (COLS, COLS), (1, COLS), (ROWS, 1)];

/// Ok(false) when the case is too close to a kink or blows up, Err on a gradient mismatch.
pub fn check(ops: &[Op], inputs: &Inputs) -> Result<bool, String> {
    let (tape, leaves, loss, margin) = build(ops, inputs);
    if margin <= KINK_MARGIN || tape.value(loss).item().abs() >= 1e6 {
        return Ok(false);
    }
    let grads = tape.backward(loss).map_err(|e| e.to_string())?;
    for (li, leaf) in leaves.iter().enumerate() {
        let zero = Matrix::zeros(inputs.leaves[li].rows(), inputs.leaves[li].cols());
        let analytic = grads.wrt(*leaf).unwrap_or(&zero).clone();
        for k in 0..analytic.len() {
            let mut plus = inputs.clone();
            plus.leaves[li].as_mut_slice()[k] += STEP;
            let mut minus = inputs.clone();
            minus.leaves[li].as_mut_slice()[k] -= STEP;
            let numeric = (loss_at(ops, &plus) - loss_at(ops, &minus)) / (2.0 * STEP);
            let a = analytic.as_slice()[k];
            if relative_error(a, numeric) >= TOL {
                return Err(format!("leaf {li} elem {k}: analytic {a} vs numeric {numeric} for {ops:?}"));
            }
        }
    }
    Ok(true)
}

pub fn random_op(rng: &mut impl Rng) -> Op {
    match rng.random_range(0..20) {
        0 => Op::AddLeaf,
        1 => Op::SubLeaf,
        2 => Op::MulLeaf,
        3 => Op::DivPositive,
        4 => Op::MinLeaf,
        5 => Op::AddRow,
        6 => Op::MulRow,
        7 => Op::MulCol,
        8 => Op::Neg,
        9 => Op::Scale(rng.random_range(-2.0..2.0)),
        10 => Op::Offset(rng.random_range(-1.0..1.0)),
        11 => Op::Relu,
        12 => Op::LeakyRelu,
        13 => Op::Softplus,
        14 => Op::DampedExp,
        15 => Op::LogSoftplus,
        16 => Op::Square,
        17 => Op::Clamp,
        18 => Op::MatMul,
        _ => Op::ConcatSlice(rng.random_range(0..=COLS)),
    }
}

pub fn random_case(rng: &mut impl Rng) -> (Vec<Op>, Inputs) {
    let len = rng.random_range(1..7);
    let ops = (0..len).map(|_| random_op(rng)).collect();
    let leaves = SHAPES
        .iter()
        .map(|&(r, c)| Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.5..1.5)).collect()))
        .collect();
    (ops, Inputs { leaves })
}
