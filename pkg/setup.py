"""
Setup script for the Noise-Tailored QITE Toolkit
Checks the environment and configuration before running experiments
"""

import json
from pathlib import Path


def create_env_file():
    """Create .env file from template if it doesn't exist"""
    env_file = Path('.env')
    env_example = Path('env.example')

    if env_file.exists():
        print("✅ .env file already exists")
        return

    if env_example.exists():
        print("📝 Creating .env file from template...")
        env_file.write_text(env_example.read_text())
        print("✅ .env file created")
    else:
        print("❌ env.example not found")


def verify_config():
    """Verify config.json exists, parses and names known presets"""
    config_file = Path('config.json')

    if not config_file.exists():
        print("❌ config.json not found!")
        return False

    try:
        with open(config_file, 'r') as f:
            config = json.load(f)
    except json.JSONDecodeError:
        print("❌ config.json is invalid JSON")
        return False

    presets = set(config.get('noise_presets', {})) | {'device_like_cz', 'coherent_heavy', 'depolarizing_only', 'noiseless'}
    default = config.get('simulation', {}).get('default_preset', 'device_like_cz')
    if default not in presets:
        print(f"❌ simulation.default_preset '{default}' is not a known preset")
        return False
    print(f"✅ config.json is valid ({len(config.get('qite', {}).get('experiments', {}))} QITE experiments)")
    return True


def check_dependencies():
    """Check if required packages are installed"""
    required_packages = {
        'numpy': 'numpy',
        'scipy': 'scipy',
        'python-dotenv': 'dotenv',
    }

    missing = []
    for package, module in required_packages.items():
        try:
            __import__(module)
        except ImportError:
            missing.append(package)

    if missing:
        print(f"❌ Missing packages: {', '.join(missing)}")
        print("   Run: pip install -r requirements.txt")
        return False
    print("✅ All required packages installed")
    return True


def main():
    """Run setup checks"""
    print("🔧 Noise-Tailored QITE Toolkit Setup\n")

    create_env_file()
    print()

    verify_config()
    print()

    check_dependencies()
    print()

    print("📋 Next steps:")
    print("1. (Optional) Edit config.json to change grids, presets or QITE experiments")
    print("2. Run: ./run.sh test")
    print("3. Run: python main.py cb")
    print("4. Run: python main.py qite --experiment exp4")


if __name__ == "__main__":
    main()
