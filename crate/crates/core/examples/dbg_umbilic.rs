use cb_lab::config::RunConfig;
use std::time::Instant;
fn main() {
    let cfg = RunConfig {
        polynomial: vec![[3,0,1,1],[1,2,-3,1],[2,0,1,1],[0,2,1,1]],
        region: [-2.0,2.0,-2.0,2.0],
        fiber_window: [-1.6,1.6,-1.6,1.6],
        grid_n: 12, grid_m: 24, caustic_samples: 256,
        tolerances: Default::default(), connection: Default::default(), output_dir: None,
    };
    let f = cfg.function().unwrap();
    let t0 = Instant::now();
    match cb_lab::loci::diagram::assemble_cb_diagram(&f, &cfg) {
        Ok(d) => {
            println!("elapsed {:?}", t0.elapsed());
            println!("chambers: {}", d.chambers.len());
            for c in &d.chambers {
                println!("  chamber {} rep ({:.3},{:.3}) pts {} edges {} exits {}", c.id, c.representative.x, c.representative.y, c.portrait.points.len(), c.portrait.edges.len(), c.portrait.exits.len());
            }
            println!("walls: {}", d.walls.len());
            for w in &d.walls {
                println!("  wall {} {:?} len {} adj {:?}", w.id, w.kind, w.polyline.len(), w.adjacent);
            }
            println!("cusps: {:?}", d.caustic.cusps);
            for c in &d.codim2 { println!("  codim2 {:?} at ({:.3},{:.3}) walls {:?}", c.kind, c.location.x, c.location.y, c.walls); }
        }
        Err(e) => println!("ERR {e}"),
    }
}
