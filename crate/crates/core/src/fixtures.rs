//! Small hand-built instances used across tests, examples and the CLI.

use crate::instance::{BadEvent, InstanceError, LllInstance, Variable};

fn s(v: &str) -> String {
    v.to_string()
}

/// Three events `u, v, w` on a triangle with one fair coin per pair. Each
/// event occurs when both of its shared coins are heads, and, when
/// `private_coins` is set, also its own private coin.
///
/// Without private coins every event has probability 1/4 = 2^-2, which
/// violates the criterion; with them it is 1/8.
pub fn coin_triangle(private_coins: bool) -> Result<LllInstance, InstanceError> {
    let mut vars = vec![
        Variable::uniform("Xuv", ["H", "T"]),
        Variable::uniform("Xuw", ["H", "T"]),
        Variable::uniform("Xvw", ["H", "T"]),
    ];
    let shared = [("u", ["Xuv", "Xuw"]), ("v", ["Xuv", "Xvw"]), ("w", ["Xuw", "Xvw"])];
    let mut events = Vec::new();
    for (id, coins) in shared {
        let mut vs: Vec<String> = coins.iter().map(|c| s(c)).collect();
        let mut row = vec![s("H"), s("H")];
        if private_coins {
            let p = format!("P{id}");
            vars.push(Variable::uniform(p.clone(), ["H", "T"]));
            vs.push(p);
            row.push(s("H"));
        }
        events.push(BadEvent::new(id, vs, vec![row]));
    }
    LllInstance::build(vars, events, 3)
}

/// The coin triangle with the private coins replaced by one three-way
/// variable `Z` shared by all events: each event occurs when its two pair
/// coins are heads and `Z` lands on the event's own face. Probability
/// 1/12 < 1/4.
pub fn rank3_triangle() -> Result<LllInstance, InstanceError> {
    let vars = vec![
        Variable::uniform("Xuv", ["H", "T"]),
        Variable::uniform("Xuw", ["H", "T"]),
        Variable::uniform("Xvw", ["H", "T"]),
        Variable::uniform("Z", ["u", "v", "w"]),
    ];
    let shared = [("u", ["Xuv", "Xuw"]), ("v", ["Xuv", "Xvw"]), ("w", ["Xuw", "Xvw"])];
    let events = shared
        .iter()
        .map(|(id, coins)| {
            let mut vs: Vec<String> = coins.iter().map(|c| s(c)).collect();
            vs.push(s("Z"));
            BadEvent::new(*id, vs, vec![vec![s("H"), s("H"), s(id)]])
        })
        .collect();
    LllInstance::build(vars, events, 3)
}

/// Path `a - b - c` with one 8-sided die per edge and one per node; each
/// event fires when all its dice show 0. Probabilities 1/64 and 1/512.
pub fn path3() -> Result<LllInstance, InstanceError> {
    let faces: Vec<String> = (0..8).map(|i| i.to_string()).collect();
    let die = |id: &str| Variable::uniform(id, faces.clone());
    let vars = vec![die("Xab"), die("Xbc"), die("Pa"), die("Pb"), die("Pc")];
    let events = vec![
        BadEvent::new("a", vec![s("Xab"), s("Pa")], vec![vec![s("0"), s("0")]]),
        BadEvent::new(
            "b",
            vec![s("Xab"), s("Xbc"), s("Pb")],
            vec![vec![s("0"), s("0"), s("0")]],
        ),
        BadEvent::new("c", vec![s("Xbc"), s("Pc")], vec![vec![s("0"), s("0")]]),
    ];
    LllInstance::build(vars, events, 2)
}

/// Star with `leaves` leaves: one fair coin per edge; the centre fires when
/// every edge coin is heads and its 4-sided die shows 0, each leaf when its
/// coin is heads and its `2^leaves`-sided die shows `H`. Rank 2 on the edges.
pub fn coin_star(leaves: usize) -> Result<LllInstance, InstanceError> {
    let mut vars = Vec::new();
    let mut events = Vec::new();
    let mut centre_vars = Vec::new();
    for i in 0..leaves {
        let x = format!("X{i}");
        vars.push(Variable::uniform(x.clone(), ["H", "T"]));
        centre_vars.push(x.clone());
        let p = format!("P{i}");
        let faces = std::iter::once(s("H")).chain((1..(1usize << leaves)).map(|f| f.to_string()));
        vars.push(Variable::uniform(p.clone(), faces));
        events.push(BadEvent::new(
            format!("leaf{i}"),
            vec![x, p],
            vec![vec![s("H"), s("H")]],
        ));
    }
    // centre: all edge coins heads and a private 4-sided die on 0
    let faces: Vec<String> = (0..(1usize << 2)).map(|i| i.to_string()).collect();
    vars.push(Variable::uniform("Pc", faces));
    let mut vs = centre_vars;
    vs.push(s("Pc"));
    let mut row = vec![s("H"); leaves];
    row.push(s("0"));
    events.push(BadEvent::new("centre", vs, vec![row]));
    LllInstance::build(vars, events, 2)
}

/// Two events sharing one fair coin: `u` fires on heads, `v` on tails, each
/// with an 8-sided private die on 0. One dependency edge.
pub fn single_edge() -> Result<LllInstance, InstanceError> {
    let faces: Vec<String> = (0..8).map(|i| i.to_string()).collect();
    let vars = vec![
        Variable::uniform("X", ["H", "T"]),
        Variable::uniform("Pu", faces.clone()),
        Variable::uniform("Pv", faces),
    ];
    let events = vec![
        BadEvent::new("u", vec![s("X"), s("Pu")], vec![vec![s("H"), s("0")]]),
        BadEvent::new("v", vec![s("X"), s("Pv")], vec![vec![s("T"), s("0")]]),
    ];
    LllInstance::build(vars, events, 2)
}

/// Two vertex-disjoint copies of [`rank3_triangle`] with ids suffixed `1`/`2`.
pub fn two_rank3_triangles() -> Result<LllInstance, InstanceError> {
    let base = rank3_triangle()?;
    let mut vars = Vec::new();
    let mut events = Vec::new();
    for copy in ["1", "2"] {
        for v in base.variables() {
            let mut v = v.clone();
            v.id.push_str(copy);
            vars.push(v);
        }
        for e in base.events() {
            let mut e = e.clone();
            e.id.push_str(copy);
            for name in &mut e.vars {
                name.push_str(copy);
            }
            events.push(e);
        }
    }
    LllInstance::build(vars, events, 3)
}
