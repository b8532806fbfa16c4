# Makes the tests directory importable so the shared mesh helpers in
# _meshes.py can be imported as a plain module from every test file.
