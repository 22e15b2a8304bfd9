use jamsched::bench;
use jamsched::mdp::*;

fn solve(systems: Vec<jamsched::model::System>, n: usize, trunc: usize) -> f64 {
    let p = MdpProblem::new(systems, n, trunc).unwrap();
    relative_value_iteration(&p, &SolveOptions::default()).unwrap().gain
}

fn main() {
    println!("het pair trunc=12 (table2 case1 cfg): {:.3}", solve(bench::example1_systems(), 1, 12));
    println!("het M=3 N=2 trunc=12 (table2 case2 cfg): {:.3}", solve(bench::heterogeneous_systems(3), 2, 12));
    for trunc in [12, 19] {
        println!("sys1 copies M=2 N=1 trunc={trunc}: {:.3}", solve(bench::homogeneous_systems_of(bench::system_1(), 2), 1, trunc));
        println!("sys1 copies M=3 N=2 trunc={trunc}: {:.3}", solve(bench::homogeneous_systems_of(bench::system_1(), 3), 2, trunc));
    }
}
