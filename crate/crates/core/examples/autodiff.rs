//! The reverse-mode tape on its own: fit a tiny least-squares problem by
//! plain gradient descent, and check one gradient against finite
//! differences.

use ndarray::array;
use usdn::diffcore::{finite_diff_check, GradCheckOptions, ParamStore, Tape};

fn main() -> usdn::Result<()> {
    let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]];
    let y = array![[1.0], [-2.0], [-1.0], [4.0]];

    let mut store = ParamStore::new();
    let w = store.insert("w", array![[0.0], [0.0]]);

    let loss = |t: &mut Tape, p: &ParamStore| {
        let (xv, yv) = (t.leaf(x.clone()), t.leaf(y.clone()));
        let wv = t.param(p, w);
        let pred = t.matmul(xv, wv)?;
        let r = t.sub(pred, yv)?;
        let sq = t.square(r);
        let total = t.sum(sq);
        Ok(t.scale(total, 0.5))
    };

    let report = finite_diff_check("least squares", loss, &mut store, None, GradCheckOptions::default())?;
    print!("{report}");

    for step in 0..200 {
        store.zero_grad();
        let mut tape = Tape::new();
        let l = loss(&mut tape, &store)?;
        tape.backward(l)?;
        tape.accumulate_param_grads(&mut store);
        let g = store.grad(w).clone();
        *store.value_mut(w) -= &(g * 0.1);
        if step % 50 == 0 {
            println!("step {step:3}: loss {:.6}", tape.scalar(l));
        }
    }
    println!("w = {:?} (exact solution [1, -2])", store.value(w).column(0).to_vec());
    Ok(())
}
