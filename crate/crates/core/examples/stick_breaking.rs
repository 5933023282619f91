//! Kumaraswamy draws turned into simplex rows by stick breaking, and how
//! the entropy function scores them.

use ndarray::{array, Array2};
use usdn::losses::entropy_rows;
use usdn::stickbreak::{kumaraswamy_inverse, stick_break, SimplexStats};

fn main() -> usdn::Result<()> {
    let u = array![
        [0.5, 0.5, 0.5],
        [0.9, 0.1, 0.1],
        [0.99, 0.99, 0.99],
        [0.01, 0.01, 0.5],
    ];
    let beta = array![[1.0], [1.0], [0.2], [5.0]];
    let v = kumaraswamy_inverse(&u, &beta)?;
    let s = stick_break(&v);
    let h = entropy_rows(&s, 1.0);

    println!("{:>28}  {:>34}  {:>8}", "u", "s", "H1(s)");
    for i in 0..s.nrows() {
        println!("{:>28}  {:>34}  {:8.4}", fmt(u.row(i).to_vec()), fmt(s.row(i).to_vec()), h[[i, 0]]);
    }
    let stats = SimplexStats::of(&s);
    println!("max |row sum - 1| = {:.1e}, min entry = {:.3}", stats.max_row_sum_deviation, stats.min_entry);

    let uniform = Array2::from_elem((1, 4), 0.25);
    println!("H1(uniform, c=4) = {:.6} = ln 4", entropy_rows(&uniform, 1.0)[[0, 0]]);
    Ok(())
}

fn fmt(v: Vec<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}
