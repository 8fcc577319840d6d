use lelab_core::bubble::*;
use lelab_core::hyperbola::CriticalPair;
use lelab_core::projections::*;

fn main() {
    let pair = CriticalPair::new(8, 1.1).unwrap();
    let profile = shoot_ground_state(&pair, 100.0, 1e-13).unwrap();
    let dc = decay_constants(&profile).unwrap();
    let mu = 0.01f64;
    for (tag, mesh) in [
        ("default", RadialMesh::for_spike(mu)),
        ("fine", RadialMesh::two_zone(0.25, mu / 800.0, 1.25e-4)),
    ] {
        let spike = SpikeFunctions::new(&profile, mu);
        let (_, pv) = project_pair(&profile, mu, &mesh).unwrap();
        let lead_v = dc.b_decay * mu.powf(pair.u_scale_exponent());
        print!("{tag}: ");
        for r in [0.2, 0.35, 0.5, 0.7, 0.9] {
            let e = pv.value_at(r) - spike.v(r) + lead_v;
            print!(" e({r})={e:.2e}");
        }
        println!();
    }
}
