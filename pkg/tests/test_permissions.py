"""Grant-system property: access is additive. Adding grants never takes
anything away, and every grant opens exactly what it names."""

import random

from basinfo.store import ACTIONS, BasinStore

from conftest import mkseries, mkstation


def build_world(tmp_path):
    store = BasinStore(tmp_path / "perm")
    store.add_user("ana", "pw", groups=("field", "office"))
    store.add_user("ben", "pw", groups=("field",))
    store.add_user("cho", "pw")
    store.add_user("root", "pw", is_admin=True)
    principals = {name: store.get_user_by_username(name)
                  for name in ("ana", "ben", "cho", "root")}
    principals["anon"] = None

    objects = []
    for n in (1, 2):
        area = f"sa-{n}"
        store.create_study_area(area, f"Area {n}")
        objects.append(area)
        st = f"st-{n}"
        store.register_station(mkstation(st, lat=9.0 + n), area)
        objects.append(st)
        sid = f"sr-{n}"
        store.register_series(mkseries([1.0, 2.0], series_id=sid,
                                       station_id=st), area)
        objects.append(sid)
    return store, principals, objects


def snapshot(store, principals, objects):
    return {
        (pname, obj, action): store.check_permission(user, obj, action)
        for pname, user in principals.items()
        for obj in objects
        for action in ACTIONS
    }


def test_everything_starts_denied_except_admin(tmp_path):
    store, principals, objects = build_world(tmp_path)
    for (pname, obj, action), allowed in snapshot(store, principals, objects).items():
        assert allowed == (pname == "root"), (pname, obj, action)


def test_thousand_random_grants_only_ever_add_access(tmp_path):
    store, principals, objects = build_world(tmp_path)
    rng = random.Random(20140630)

    group_members = {
        "field": ["ana", "ben"],
        "office": ["ana"],
        "everyone": ["ana", "ben", "cho", "root", "anon"],
    }
    subjects = ([("user", p.id, [name]) for name, p in principals.items()
                 if p is not None] +
                [("group", g, members) for g, members in group_members.items()])

    # Objects an object-id grant reaches: itself, plus area grants reach
    # everything registered under the area.
    reach = {
        "sa-1": {"sa-1", "st-1", "sr-1"},
        "sa-2": {"sa-2", "st-2", "sr-2"},
        "st-1": {"st-1"}, "sr-1": {"sr-1"},
        "st-2": {"st-2"}, "sr-2": {"sr-2"},
    }

    allowed = snapshot(store, principals, objects)
    for step in range(1000):
        kind, subject_id, members = rng.choice(subjects)
        obj = rng.choice(objects)
        actions = rng.sample(ACTIONS, rng.randint(1, len(ACTIONS)))
        store.add_grant(subject_id, kind, obj, actions)

        # The named subjects gain exactly the granted actions on the reach set.
        for member in members:
            user = principals[member]
            for target in reach[obj]:
                for action in actions:
                    assert store.check_permission(user, target, action), \
                        (step, member, target, action)

        if step % 100 == 99:
            now = snapshot(store, principals, objects)
            lost = [key for key, was in allowed.items() if was and not now[key]]
            assert lost == [], f"grants revoked access: {lost[:5]}"
            allowed = now

    # Admin still sees everything; unknown actions still always deny.
    assert all(v for (p, _, _), v in snapshot(store, principals, objects).items()
               if p == "root")
    assert not store.check_permission(principals["root"], "sr-1", "teleport")


def test_grant_on_object_does_not_leak_to_siblings(tmp_path):
    store, principals, objects = build_world(tmp_path)
    ben = principals["ben"]
    store.add_grant(ben.id, "user", "sr-1", ["view-data"])
    assert store.check_permission(ben, "sr-1", "view-data")
    assert not store.check_permission(ben, "sr-2", "view-data")
    assert not store.check_permission(ben, "st-1", "view-data")
    assert not store.check_permission(ben, "sa-1", "view-data")
