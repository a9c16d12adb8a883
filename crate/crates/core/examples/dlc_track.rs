//! Builds the collision-prioritized double lane change and prints its
//! layout and a coarse centerline.

use lmpcc::track::dlc_scenario;

fn main() -> lmpcc::Result<()> {
    let scenario = dlc_scenario(60.0, true)?;
    println!("{}: v_ref {:.2} m/s, finish at s = {:.1} m", scenario.name, scenario.v_ref, scenario.finish_s);
    for o in &scenario.obstacles {
        println!("obstacle at ({:.1}, {:.2}), semi-axes {:.3} x {:.3}, margin {}", o.x, o.y, o.a, o.b, o.margin);
    }
    for seg in scenario.edges.segments() {
        println!("from s = {:6.1}: corridor [{:.2}, {:.2}]", seg.s_start, seg.right, seg.left);
    }
    print!("\n{}", scenario.centerline_csv(10.0));
    Ok(())
}
