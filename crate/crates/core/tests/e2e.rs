use chunkrx::runtime::stream_digest;
use chunkrx::scenario::{run_e2e, E2eConfig};
use chunkrx::Profile;

fn desk(frames: usize, workers: usize, servers: usize) -> E2eConfig {
    let p = Profile::desk();
    E2eConfig {
        frames,
        tail_frames: E2eConfig::default_tail(&p).unwrap(),
        esn0_db: Some(12.0),
        clock_offset_ppm: 10.0,
        carrier_per_symbol: 1e-4,
        initial_phase: 0.7,
        workers,
        servers,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn desk_loop_is_error_free_at_12db() {
    let r = run_e2e(&Profile::desk(), &desk(128, 4, 1), None).unwrap();
    assert_eq!(r.score.bit_errors, 0);
    assert_eq!(r.score.failed_blocks, 0);
    assert!(r.score.frames_recovered >= 127, "{:?}", r.score.missing);
    assert_eq!(r.run.chunk_failures, 0);
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let p = Profile::desk();
    let one = run_e2e(&p, &desk(48, 1, 1), None).unwrap();
    let many = run_e2e(&p, &desk(48, 5, 1), None).unwrap();
    assert_eq!(stream_digest(&one.blocks), stream_digest(&many.blocks));
    assert_eq!(one.blocks.len(), many.blocks.len());
}

#[test]
fn servers_split_the_stream_without_changing_it() {
    let p = Profile::desk();
    let one = run_e2e(&p, &desk(64, 2, 1), None).unwrap();
    for servers in [2, 4] {
        let r = run_e2e(&p, &desk(64, 2, servers), None).unwrap();
        assert_eq!(r.score.bit_errors, 0);
        assert_eq!(r.score.frames_recovered, one.score.frames_recovered);
        assert_eq!(stream_digest(&r.blocks), stream_digest(&one.blocks), "S={servers}");
    }
}

#[test]
fn packet_loss_costs_chunks_not_correctness() {
    let p = Profile::desk();
    let cfg = E2eConfig {
        loss_rate: 5e-3,
        ..desk(96, 2, 1)
    };
    let r = run_e2e(&p, &cfg, None).unwrap();
    assert!(r.network.chunks_dropped > 0, "{:?}", r.network);
    assert!(r.network.chunks > 0, "{:?}", r.network);
    assert_eq!(r.score.bit_errors, 0);
    assert!(r.score.frames_recovered < 96);
    assert!(r.score.frames_recovered > 0);
}
