// Temporary calibration probe: prints a per-interval trace of one trial.

use gut_core::harness::{init_trial, load_scenario};
use gut_core::world::{outcome, step, Outcome, Side};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: probe <scenario> [seed]");
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(42);
    let config = load_scenario(&path).unwrap();
    let (mut world, mut engine, mut rng) = init_trial(&config, seed).unwrap();

    loop {
        let o = outcome(&world);
        if o != Outcome::Ongoing {
            println!("tick {:4}: outcome {:?}", world.tick, o);
            break;
        }
        if world.tick % 50 == 0 {
            let ne = world.living_count(Side::Explorer);
            let nm = world.living_count(Side::Monster);
            let cx = world.centroid(Side::Explorer).map(|c| c.x).unwrap_or(f64::NAN);
            let mean_e: f64 = world.living(Side::Explorer).map(|a| a.energy).sum::<f64>() / ne.max(1) as f64;
            let mean_m: f64 = world.living(Side::Monster).map(|a| a.energy).sum::<f64>() / nm.max(1) as f64;
            let d = engine.team_state().cached().map(|d| {
                format!("{:?} rule{} g{} press={} target={:?}", d.shape, d.target_rule, d.groups, d.press, d.target)
            });
            println!(
                "tick {:4}: E {:2} M {:2} cx {:5.1} eE {:5.1} eM {:5.1} {:?}",
                world.tick, ne, nm, cx, mean_e, mean_m, d
            );
        }
        step(&mut world, &mut engine, &mut rng);
    }
}
