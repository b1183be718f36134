//! Records a tiny message-passing expression on a tape, runs the reverse
//! sweep and prints the gradients together with every recorded kernel.
//!
//! `cargo run --example tensor_autodiff`

use gnnbench::profiler::{ByteModel, Recorder, Timer};
use gnnbench::tensor::{Tape, Tensor};

fn main() -> gnnbench::Result<()> {
    let mut tape = Tape::<f64>::with_recorder(Recorder::new(Timer::Wall, ByteModel::default()));
    let x = tape.param(Tensor::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 3.0]])?);
    let w = tape.param(Tensor::from_rows(&[vec![0.5, -0.25], vec![1.5, 0.75]])?);

    // Edges 0->1, 2->1, 1->0: gather senders, transform, sum into receivers.
    let loss = tape.scoped("demo", |t| -> gnnbench::Result<_> {
        let msg = t.gather_rows(x, vec![0, 2, 1])?;
        let h = t.matmul(msg, w)?;
        let h = t.tanh(h)?;
        let agg = t.unsorted_segment_sum(h, vec![1, 1, 0], 3)?;
        t.sum(agg)
    })?;
    println!("loss = {:.6}", tape.value(loss).data()[0]);

    let grads = tape.backward(loss)?;
    println!("d loss / d x = {:?}", grads.get(x).unwrap().data());
    println!("d loss / d w = {:?}", grads.get(w).unwrap().data());

    println!("\n{:<40} {:<20} {:>6} {:>8}", "kernel", "category", "flops", "bytes");
    for r in tape.recorder().records() {
        println!("{:<40} {:<20} {:>6} {:>8}", r.op, r.category.to_string(), r.flops, r.bytes.hbm);
    }
    Ok(())
}
