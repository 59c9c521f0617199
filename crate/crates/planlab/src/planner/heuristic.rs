//! Admissible lower bound on remaining plan length.
//!
//! Every block that provably must move costs two actions (lift + place), or
//! one if it is already in the hand. A block provably must move when
//!   (1) its goal place differs from its current place,
//!   (2) it sits on a block that must move, or
//!   (3) it sits directly on the goal target of another block that must move,
//! closed under fixpoint. On top of that, two extra actions per block that
//! provably must move twice:
//!   (a) a block below it right now is a mover that its goal column
//!       transitively rests on, or
//!   (b) it belongs to a cycle of blocks squatting on one another's goal
//!       targets (the out-edge "who occupies my target" is unique per block,
//!       so these cycles are vertex-disjoint by construction).
//! Cycles touching case (a) blocks are skipped so nothing is counted twice.

use super::space::{GoalPos, Packed, SearchSpace, HAND, TABLE};

pub(crate) fn lower_bound(space: &SearchSpace, s: &Packed) -> u32 {
    let n = space.n();
    if n == 0 {
        return 0;
    }
    let child = s.children();
    let held = s.held();

    let mut must = vec![false; n];
    for x in 0..n {
        match space.goal_pos[x] {
            GoalPos::Free => {}
            GoalPos::Table => must[x] = s.place[x] != TABLE,
            GoalPos::On(y) => must[x] = s.place[x] != y,
        }
        // A block pinned under something the goal wants clear must get off.
        if space.goal_clear[x] && child[x] != HAND {
            must[child[x] as usize] = true;
        }
    }
    loop {
        // Goal targets of current movers; sitting on one means squatting
        // (x itself is not a mover yet here, so the mover is someone else).
        let mut mover_target = vec![false; n];
        for y in 0..n {
            if must[y] {
                if let GoalPos::On(t) = space.goal_pos[y] {
                    mover_target[t as usize] = true;
                }
            }
        }
        let mut grew = false;
        for x in 0..n {
            if must[x] {
                continue;
            }
            let p = s.place[x];
            if p < TABLE && (must[p as usize] || mover_target[p as usize]) {
                must[x] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }

    let mut total = 0u32;
    for x in 0..n {
        if must[x] {
            total += if s.place[x] == HAND { 1 } else { 2 };
        }
    }
    if let Some(h) = held {
        if !must[h as usize] && space.goal_handempty {
            total += 1;
        }
    }

    // Case (a) double movers: walk the current stack below x and the goal
    // column below x; a mover in both forces x to park somewhere first.
    let mut double = vec![false; n];
    let below_now = |x: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = s.place[x];
        while cur < TABLE {
            out.push(cur as usize);
            cur = s.place[cur as usize];
        }
        out
    };
    let below_goal = |x: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = space.goal_pos[x];
        let mut steps = 0;
        while let GoalPos::On(y) = cur {
            out.push(y as usize);
            cur = space.goal_pos[y as usize];
            steps += 1;
            if steps > n {
                break;
            }
        }
        out
    };
    for x in 0..n {
        if !must[x] || s.place[x] == HAND {
            continue;
        }
        let goal_chain = below_goal(x);
        if goal_chain.is_empty() {
            continue;
        }
        if below_now(x)
            .iter()
            .any(|z| must[*z] && goal_chain.contains(z))
        {
            double[x] = true;
            total += 2;
        }
    }

    // Case (b): functional graph x -> occupant of x's goal target.
    let out_edge = |x: usize| -> Option<usize> {
        if !must[x] || double[x] || s.place[x] == HAND {
            return None;
        }
        match space.goal_pos[x] {
            GoalPos::On(y) if child[y as usize] != HAND => {
                let o = child[y as usize] as usize;
                (o != x && must[o] && !double[o] && s.place[o] != HAND).then_some(o)
            }
            _ => None,
        }
    };
    // 0 = unvisited, 1 = on the current walk, 2 = finished.
    let mut color = vec![0u8; n];
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if color[cur] == 1 {
                // Found a cycle: everything from cur onwards in the walk.
                let pos = path.iter().position(|&p| p == cur).unwrap();
                if path[pos..].iter().all(|&p: &usize| !double[p]) {
                    total += 2;
                }
                break;
            }
            if color[cur] == 2 {
                break;
            }
            color[cur] = 1;
            path.push(cur);
            match out_edge(cur) {
                Some(next) => cur = next,
                None => break,
            }
        }
        for p in path {
            color[p] = 2;
        }
    }

    total
}

#[cfg(test)]
mod tests {
    use crate::strips::{parse_state, State, Task};

    fn bound(init: &str, goal: &str) -> u32 {
        let init = State::new(parse_state(init).unwrap()).unwrap();
        let task = Task::bw("t", init, parse_state(goal).unwrap());
        super::super::lower_bound(&task).unwrap()
    }

    #[test]
    fn satisfied_goal_costs_nothing() {
        assert_eq!(bound("(handempty) (ontable a) (clear a)", "(ontable a)"), 0);
    }

    #[test]
    fn single_stack_move_costs_two() {
        assert_eq!(
            bound(
                "(handempty) (ontable a) (clear a) (ontable b) (clear b)",
                "(on a b)"
            ),
            2
        );
    }

    #[test]
    fn held_block_costs_one() {
        assert_eq!(bound("(holding a) (ontable b) (clear b)", "(on a b)"), 1);
    }

    #[test]
    fn blocks_above_movers_are_movers() {
        // c sits on b, b must go onto a, so c must move as well.
        assert_eq!(
            bound(
                "(handempty) (ontable a) (clear a) (ontable b) (on c b) (clear c)",
                "(on b a)"
            ),
            4
        );
    }

    #[test]
    fn squatter_on_goal_target_is_a_mover() {
        // c occupies b, which is a's goal target.
        assert_eq!(
            bound(
                "(handempty) (ontable a) (clear a) (ontable b) (on c b) (clear c)",
                "(on a b)"
            ),
            4
        );
    }

    #[test]
    fn inverted_tower_counts_double_movers() {
        // a on b on c, rebuilt onto d: b and a must each park on the table.
        assert_eq!(
            bound(
                "(handempty) (ontable c) (on b c) (on a b) (clear a) (ontable d) (clear d)",
                "(on a b) (on b c) (on c d)"
            ),
            10
        );
    }

    #[test]
    fn swap_cycle_counts_one_double() {
        // a on b, c on d; goals a on d, c on b: a two-cycle of squatters.
        assert_eq!(
            bound(
                "(handempty) (ontable b) (on a b) (clear a) (ontable d) (on c d) (clear c)",
                "(on a d) (on c b)"
            ),
            6
        );
    }

    #[test]
    fn six_block_tower_rebuild_is_sixteen() {
        assert_eq!(
            bound(
                "(handempty) (clear a) (clear d) (clear b) (on d f) (on f c) (on b e) (ontable a) (ontable c) (ontable e)",
                "(on a b) (on b c) (on c d) (on d e) (on e f)"
            ),
            16
        );
    }

    #[test]
    fn goal_clear_forces_the_occupant_off() {
        assert_eq!(
            bound(
                "(handempty) (ontable a) (on b a) (clear b)",
                "(clear a) (ontable a)"
            ),
            2
        );
    }
}
