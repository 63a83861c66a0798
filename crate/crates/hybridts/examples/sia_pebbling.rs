//! Prints the three-level pebbling schedule and runs the reversible s-implication circuit
//! against the reference on a banded formula.

use hybridts::sia::{random_banded_kcnf, resource_account, sia_reference, siar_execute, siar_schedule, SiaInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    println!("{}", siar_schedule(3).to_text());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (n, w, s) = (32, 4, 2);
    let f = random_banded_kcnf(n, 40, 3, w, &mut rng);
    let inst = SiaInstance::new(&f, w, s).unwrap();
    for _ in 0..4 {
        let advice: Vec<bool> = (0..12).map(|_| rng.gen()).collect();
        let trace = siar_execute(&inst, &advice).unwrap();
        let reference = sia_reference(&f, &advice, s);
        println!(
            "{:?} after {} advice bits; matches reference: {}; {} leaf calls, peak {} live cells, self-inverse {}",
            trace.outcome.kind,
            trace.outcome.advice_consumed,
            trace.outcome == reference,
            trace.leaf_calls,
            trace.peak_live,
            trace.self_inverse
        );
    }
    println!("{:#?}", resource_account(n, w, s, 6));
}
