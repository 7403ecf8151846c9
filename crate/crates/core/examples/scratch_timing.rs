use fqtcircle::field::FieldSpec;
use fqtcircle::matrix::PolyMatrix;
use fqtcircle::poly::Poly;
use fqtcircle::quadpair::QuadricPair;

fn main() {
    for p in [3u32, 5] {
        let fq = FieldSpec::new(p, 1).build().unwrap();
        for (i, (m1, m2)) in [
            (vec![vec![1,0,0],vec![0,1,0],vec![0,0,1]], vec![vec![0,0,0],vec![0,1,0],vec![0,0,2]]),
            (vec![vec![1,0,0],vec![0,1,0],vec![0,0,1]], vec![vec![0,1,0],vec![1,0,0],vec![0,0,2]]),
            (vec![vec![1,0,0],vec![0,2,0],vec![0,0,1]], vec![vec![0,0,1],vec![0,1,0],vec![1,0,0]]),
            (vec![vec![1,0,0],vec![0,1,0],vec![0,0,2]], vec![vec![0,1,0],vec![1,1,0],vec![0,0,1]]),
        ].iter().enumerate() {
            let r = QuadricPair::new(
                PolyMatrix::from_int_rows(&fq, m1),
                PolyMatrix::from_int_rows(&fq, m2),
                Poly::one(), vec![Poly::zero(); 3], &fq);
            println!("q={p} n=3 cand{i}: {:?}", r.as_ref().err());
        }
        for (i, (m1, m2)) in [
            (vec![vec![0,1,0,0],vec![1,0,0,0],vec![0,0,0,-1],vec![0,0,-1,0]], vec![vec![1,0,0,0],vec![0,1,0,0],vec![0,0,-1,0],vec![0,0,0,-2]]),
            (vec![vec![1,0,0,0],vec![0,1,0,0],vec![0,0,1,0],vec![0,0,0,1]], vec![vec![0,1,0,0],vec![1,0,0,0],vec![0,0,2,0],vec![0,0,0,1]]),
            (vec![vec![1,0,0,0],vec![0,2,0,0],vec![0,0,1,0],vec![0,0,0,2]], vec![vec![0,0,1,0],vec![0,1,0,0],vec![1,0,0,0],vec![0,0,0,1]]),
            (vec![vec![1,0,0,0],vec![0,1,0,0],vec![0,0,2,0],vec![0,0,0,1]], vec![vec![0,1,0,0],vec![1,0,0,0],vec![0,0,0,1],vec![0,0,1,2]]),
        ].iter().enumerate() {
            let r = QuadricPair::new(
                PolyMatrix::from_int_rows(&fq, m1),
                PolyMatrix::from_int_rows(&fq, m2),
                Poly::one(), vec![Poly::zero(); 4], &fq);
            println!("q={p} n=4 cand{i}: {:?}", r.as_ref().err());
        }
    }
}
