use sigshell::nn::*;
use std::time::Instant;

fn t(shape: Vec<usize>) -> Tensor {
    let len: usize = shape.iter().product();
    Tensor::new(shape, (0..len).map(|i| (i % 97) as f64 * 0.01).collect())
}

#[test]
fn bench_ops() {
    let store = ParamStore::new();
    // dense1 at w=0.25: [32,4096] x [4096,4096]
    {
        let mut tape = Tape::new(&store);
        let x = tape.input(t(vec![32, 4096]));
        let w = tape.input(t(vec![4096, 4096]));
        let b = tape.input(t(vec![4096]));
        let t0 = Instant::now();
        let y = tape.dense(x, w, b).unwrap();
        let fwd = t0.elapsed();
        let t1 = Instant::now();
        let _ = tape.backward_with(y, t(vec![32, 4096])).unwrap();
        println!("dense1 fwd {:?} bwd {:?}", fwd, t1.elapsed());
    }
    // branch conv: 66->24 k7 s1 p3 len512 batch32
    {
        let mut tape = Tape::new(&store);
        let x = tape.input(t(vec![32, 66, 512]));
        let w = tape.input(t(vec![24, 66, 7]));
        let b = tape.input(t(vec![24]));
        let t0 = Instant::now();
        let y = tape.conv1d(x, w, b, 1, 3).unwrap();
        let fwd = t0.elapsed();
        let t1 = Instant::now();
        let _ = tape.backward_with(y, t(vec![32, 24, 512])).unwrap();
        println!("branch conv fwd {:?} bwd {:?}", fwd, t1.elapsed());
    }
    // stage1 conv: 48->64 k5 s2 p2 len512
    {
        let mut tape = Tape::new(&store);
        let x = tape.input(t(vec![32, 48, 512]));
        let w = tape.input(t(vec![64, 48, 5]));
        let b = tape.input(t(vec![64]));
        let t0 = Instant::now();
        let y = tape.conv1d(x, w, b, 2, 2).unwrap();
        let fwd = t0.elapsed();
        let t1 = Instant::now();
        let _ = tape.backward_with(y, t(vec![32, 64, 256])).unwrap();
        println!("stage1 conv fwd {:?} bwd {:?}", fwd, t1.elapsed());
    }
    // dense2: [32,4096]x[2048,4096]
    {
        let mut tape = Tape::new(&store);
        let x = tape.input(t(vec![32, 4096]));
        let w = tape.input(t(vec![2048, 4096]));
        let b = tape.input(t(vec![2048]));
        let t0 = Instant::now();
        let y = tape.dense(x, w, b).unwrap();
        let fwd = t0.elapsed();
        let t1 = Instant::now();
        let _ = tape.backward_with(y, t(vec![32, 2048])).unwrap();
        println!("dense2 fwd {:?} bwd {:?}", fwd, t1.elapsed());
    }
}
