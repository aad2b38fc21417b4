use discoh::agreement::LabelMatrix;
use rand::Rng;

/// Direct definition: observed disagreement averages mismatching ordered
/// coder pairs within each unit, expected disagreement averages mismatching
/// ordered pairs over all pairable values.
pub fn alpha_oracle(cells: &[Vec<Option<u8>>]) -> Option<f64> {
    let units: Vec<Vec<u8>> = cells
        .iter()
        .map(|row| row.iter().flatten().copied().collect::<Vec<u8>>())
        .filter(|v| v.len() >= 2)
        .collect();
    if units.len() < 2 {
        return None;
    }
    let all: Vec<u8> = units.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mut d_o = 0.0;
    for u in &units {
        let m = u.len() as f64;
        let mut mismatches = 0.0;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j && u[i] != u[j] {
                    mismatches += 1.0;
                }
            }
        }
        d_o += mismatches / (m - 1.0);
    }
    d_o /= n;
    if d_o == 0.0 {
        return Some(1.0);
    }
    let mut d_e = 0.0;
    for i in 0..all.len() {
        for j in 0..all.len() {
            if i != j && all[i] != all[j] {
                d_e += 1.0;
            }
        }
    }
    d_e /= n * (n - 1.0);
    Some(1.0 - d_o / d_e)
}

pub fn to_matrix(cells: &[Vec<Option<u8>>]) -> LabelMatrix {
    let coders = cells.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut m = LabelMatrix::new(
        (0..cells.len()).map(|i| format!("u{}", i)).collect(),
        (0..coders).map(|i| format!("c{}", i)).collect(),
    );
    for (u, row) in cells.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if let Some(v) = v {
                m.set(u, c, format!("L{}", v));
            }
        }
    }
    m
}

pub fn random_cells(rng: &mut impl Rng) -> Vec<Vec<Option<u8>>> {
    let units = rng.gen_range(1..=6);
    let coders = rng.gen_range(1..=4);
    let labels = rng.gen_range(1..=4u8);
    (0..units)
        .map(|_| {
            (0..coders)
                .map(|_| if rng.gen_bool(0.8) { Some(rng.gen_range(0..labels)) } else { None })
                .collect()
        })
        .collect()
}

