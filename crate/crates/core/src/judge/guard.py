# Runs a student program under audit hooks that deny network access,
# process creation and writes outside the working directory.
import os
import sys


def _install():
    root = os.path.realpath(os.getcwd())
    devices = ("/dev/null", "/dev/stdout", "/dev/stderr")
    write_flags = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_TRUNC | os.O_APPEND
    path_events = {
        "os.remove": (0,),
        "os.rmdir": (0,),
        "os.mkdir": (0,),
        "os.rename": (0, 1),
        "os.chmod": (0,),
        "os.chown": (0,),
        "os.link": (0, 1),
        "os.symlink": (0, 1),
        "os.truncate": (0,),
        "os.utime": (0,),
        "shutil.rmtree": (0,),
        "shutil.copyfile": (1,),
        "shutil.move": (1,),
    }
    spawn_events = (
        "subprocess.Popen",
        "os.system",
        "os.exec",
        "os.posix_spawn",
        "os.spawn",
        "os.fork",
        "os.forkpty",
        "pty.spawn",
    )

    def inside(path):
        if isinstance(path, int):
            return True
        try:
            name = os.fsdecode(path)
        except Exception:
            return False
        full = os.path.realpath(os.path.join(root, name))
        return full == root or full.startswith(root + os.sep) or full in devices

    def hook(event, args):
        if event == "open":
            path, mode, flags = args[0], args[1], args[2]
            if mode is not None:
                writing = any(c in mode for c in "wax+")
            else:
                writing = bool((flags or 0) & write_flags)
            if writing and not inside(path):
                raise PermissionError("sandbox: write outside working directory denied")
        elif event.startswith("socket."):
            raise PermissionError("sandbox: network access denied")
        elif event in spawn_events:
            raise PermissionError("sandbox: process creation denied")
        elif event in path_events:
            for i in path_events[event]:
                if i < len(args) and not inside(args[i]):
                    raise PermissionError("sandbox: modification outside working directory denied")

    sys.addaudithook(hook)


def _run():
    import traceback

    path = sys.argv[1]
    sys.argv = sys.argv[1:]
    sys.path.insert(0, os.getcwd())
    with open(path, "rb") as handle:
        source = handle.read()
    scope = {"__name__": "__main__", "__file__": path, "__builtins__": __builtins__}
    try:
        exec(compile(source, path, "exec"), scope)
    except SystemExit:
        raise
    except BaseException as exc:
        tb = exc.__traceback__
        while tb is not None and tb.tb_frame.f_code.co_filename == __file__:
            tb = tb.tb_next
        traceback.print_exception(type(exc), exc, tb)
        sys.exit(1)


_install()
_run()
